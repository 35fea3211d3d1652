import numpy as np
import pytest

from dissipacert.datagen import noise_scaled_to_model, random_stable_sys, simulate
from dissipacert.errors import NotApplicable, SpecError
from dissipacert.informativity import (VerdictStatus, build_n1, certificate_block,
                                       informativity_noisy_n1, s_lemma_certificate_check)
from dissipacert.oracle import (SampleReport, _RaySampler, hinf_norm_grid,
                                n1_membership_margin, positive_real_grid, s_lemma_sampling,
                                sample_consistent_systems, trajectory_dissipation_check,
                                validate_certificate)
from dissipacert.symmat import DEFAULT_TOLERANCES, SymMat, min_eig
from dissipacert.sysmodel import (NoiseSpec, SupplyRate, Sys, convert_noise,
                                  dissipation_lmi_matrix, dual_supply, sigma_membership)


@pytest.fixture
def noisy_passive(passive_sys, rng):
    T = 6
    spec = NoiseSpec.energy_bound(1e-4 * np.eye(2), T)
    noise = noise_scaled_to_model(spec, 2, T, 0.5, seed=5)
    return simulate(passive_sys, rng.standard_normal((1, T)), [0.0], noise), spec


# ============================================================================
# Frequency domain
# ============================================================================

def test_hinf_norm_examples(scalar_sys, passive_sys):
    assert hinf_norm_grid(scalar_sys) == pytest.approx(2.0, rel=1e-6)
    assert hinf_norm_grid(Sys([[0.0]], [[0.0]], [[0.0]], [[1.0]])) == pytest.approx(1.0)
    assert hinf_norm_grid(Sys([[0.2]], [[0.0]], [[0.0]], [[-3.0]])) == pytest.approx(3.0)
    assert hinf_norm_grid(passive_sys) == pytest.approx(3.0, rel=1e-6)


def test_hinf_norm_needs_stability():
    with pytest.raises(NotApplicable):
        hinf_norm_grid(Sys([[1.5]], [[1.0]], [[1.0]], [[0.0]]))


def test_positive_real_grid(passive_sys, scalar_sys):
    assert positive_real_grid(passive_sys, grid_size=2000)
    # 1 / (z - 0.5) has negative real part at z = -1.
    assert not positive_real_grid(scalar_sys, grid_size=2000)
    with pytest.raises(SpecError):
        positive_real_grid(Sys([[0.5]], [[1.0]], [[1.0], [1.0]], [[0.0], [0.0]]))


# ============================================================================
# Trajectories
# ============================================================================

def test_trajectory_check_with_storage(passive_sys, positive_real, rng):
    P = SymMat([[1.0]])
    assert trajectory_dissipation_check(passive_sys, positive_real, P,
                                        rng.standard_normal((1, 50)), [0.7])


def test_trajectory_check_without_storage(passive_sys, positive_real):
    # x = 1, u = -0.2: s = 2 u (x + u) = -0.32 < 0 with no storage to pay for it.
    assert not trajectory_dissipation_check(passive_sys, positive_real, SymMat([[0.0]]),
                                            [[-0.2]], [1.0])


def test_trajectory_check_zero_system(positive_real, rng):
    zero = Sys([[0.0]], [[0.0]], [[0.0]], [[0.0]])
    assert trajectory_dissipation_check(zero, positive_real, SymMat([[1.0]]),
                                        rng.standard_normal((1, 10)), [0.0])


# ============================================================================
# Sampling
# ============================================================================

def test_noise_free_sampling_is_the_identified_system(scalar_sys, scalar_data):
    systems = sample_consistent_systems(scalar_data, NoiseSpec.n0(), 10)
    assert len(systems) == 1
    np.testing.assert_allclose(systems[0].stacked(), scalar_sys.stacked(), atol=1e-10)


def test_sampled_systems_are_consistent(noisy_passive):
    data, spec = noisy_passive
    systems = sample_consistent_systems(data, spec, 100, seed=1)
    assert len(systems) == 100
    for sys in systems:
        assert sigma_membership(sys, data, spec)


def test_sampling_accepts_the_n2_description(noisy_passive):
    data, spec = noisy_passive
    systems = sample_consistent_systems(data, convert_noise(spec), 20, seed=2)
    assert len(systems) == 20
    assert all(sigma_membership(sys, data, spec) for sys in systems)


def test_boundary_points_are_tight(noisy_passive, rng):
    data, spec = noisy_passive
    sampler = _RaySampler(build_n1(data, spec.matrix), 2, DEFAULT_TOLERANCES)
    assert sampler.margin(sampler.center) > 0
    for _ in range(10):
        direction = rng.standard_normal(sampler.center.shape)
        direction /= np.linalg.norm(direction)
        point = sampler.boundary(direction)
        assert abs(sampler.margin(point)) <= 1e-6
        assert not sampler.inside(sampler.center + 1.1 * (point - sampler.center))


def test_sampling_count_must_be_positive(scalar_data):
    with pytest.raises(SpecError):
        sample_consistent_systems(scalar_data, NoiseSpec.n0(), 0)


def test_membership_margin_of_generator(passive_sys, noisy_passive):
    data, spec = noisy_passive
    assert n1_membership_margin(data, spec.matrix, passive_sys) > 0


def test_validate_certificate(noisy_passive, positive_real):
    data, spec = noisy_passive
    verdict = informativity_noisy_n1(data, spec.matrix, positive_real)
    report = validate_certificate(data, spec, positive_real, verdict.storage, count=100)
    assert report.passed
    assert report.accepted == 100
    bad = validate_certificate(data, spec, SupplyRate.bounded_real(1.0, 1, 1),
                               verdict.storage, count=20)
    assert not bad.passed
    assert bad.worst_margin < 0


# ============================================================================
# S-lemma sampling
# ============================================================================

def test_s_lemma_sampling_identical_forms():
    N = SymMat(np.diag([1.0, -1.0]))
    report = s_lemma_sampling(N, N, (1, 1), 200, seed=0)
    assert report.passed and report.accepted == 200


def test_s_lemma_sampling_dominating_form():
    N = SymMat(np.diag([1.0, -1.0]))
    M = SymMat(N.entries + np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert s_lemma_sampling(M, N, (1, 1), 200, seed=1).passed


def test_s_lemma_sampling_finds_planted_violation():
    N = SymMat(np.diag([1.0, -1.0]))
    M = SymMat(np.diag([-3.0, -1.0]))
    report = s_lemma_sampling(M, N, (1, 1), 50, seed=2)
    assert not report.passed
    assert report.worst_margin <= -3.0 + 1e-9


def test_s_lemma_sampling_dimension_check():
    with pytest.raises(SpecError):
        s_lemma_sampling(SymMat(np.eye(2)), SymMat(np.eye(3)), (1, 1), 10)


def test_sample_report_merge():
    a = SampleReport(10, 8, -0.5, ["x"], [3])
    b = SampleReport(5, 5, 0.25, [], [1])
    merged = a.merge(b)
    assert (merged.attempted, merged.accepted, merged.worst_margin) == (15, 13, -0.5)
    assert merged.failures == ["x"] and merged.seeds == [1, 3]
    assert not merged.passed
    assert SampleReport().passed


# ============================================================================
# Randomized sweeps
# ============================================================================

@pytest.mark.slow
def test_noisy_certificates_hold_on_sampled_systems():
    informative = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        sys = random_stable_sys((2, 1, 1), 0.8, seed=seed)
        T = 20
        spec = NoiseSpec.energy_bound(1e-3 * np.eye(3), T)
        noise = noise_scaled_to_model(spec, 3, T, 0.5, seed=seed)
        data = simulate(sys, rng.standard_normal((1, T)), rng.standard_normal(2), noise)
        S = SupplyRate.bounded_real(4.0 * hinf_norm_grid(sys), 1, 1)
        verdict = informativity_noisy_n1(data, spec.matrix, S)
        if verdict.status is not VerdictStatus.INFORMATIVE:
            continue
        informative += 1
        assert min_eig(verdict.storage) >= 1e-6
        report = validate_certificate(data, spec, S, verdict.storage, count=1000, seed=seed,
                                      margin_tol=1e-6)
        assert report.passed, seed
        block = SymMat(certificate_block(verdict.dual_storage.entries, dual_supply(S), data.n),
                       atol_sym=np.inf)
        assert s_lemma_certificate_check(block, build_n1(data, spec.matrix), verdict.multiplier)
    assert informative >= 5


@pytest.mark.slow
@pytest.mark.parametrize("factor", [0.8, 1.2])
def test_trajectory_check_agrees_with_the_lmi(bounded_real_edge, factor):
    for seed in range(50):
        sys, P, S = bounded_real_edge(seed, factor)
        L = dissipation_lmi_matrix(sys, S, P)
        weights, vectors = np.linalg.eigh(L.entries)
        rng = np.random.default_rng(seed)
        inputs = rng.standard_normal((sys.m, 30))
        x0 = rng.standard_normal(sys.n)
        if factor < 1:
            # Start on the most negative direction of L(P).
            x0, inputs[:, 0] = vectors[:sys.n, 0], vectors[sys.n:, 0]
        held = trajectory_dissipation_check(sys, S, P, inputs, x0)
        assert held == (weights[0] >= 0), seed
