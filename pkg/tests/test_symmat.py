import numpy as np
import pytest

from dissipacert.errors import SingularBlock, SpecError
from dissipacert.symmat import (Inertia, SymMat, Tolerances, haynsworth_check, inertia,
                                is_pd, is_psd, min_eig, quadratic_frame, schur_complement)


def test_symmat_rejects_asymmetric_input():
    with pytest.raises(SpecError):
        SymMat([[0.0, 1.0], [0.0, 0.0]])


def test_symmetry_tolerance_is_absolute():
    big = [[1e6, 1e6 + 1e-3], [1e6, 0.0]]
    with pytest.raises(SpecError):
        SymMat(big)
    assert SymMat(big, atol_sym=1e-2).entries[0, 1] == pytest.approx(1e6 + 5e-4)


def test_symmat_symmetrizes_rounding_noise():
    a = SymMat([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
    assert a.entries[0, 1] == a.entries[1, 0]
    assert not a.entries.flags.writeable


def test_symmat_rejects_non_square_and_nan():
    with pytest.raises(SpecError):
        SymMat(np.zeros((2, 3)))
    with pytest.raises(SpecError):
        SymMat([[np.nan]])


def test_inertia_of_bounded_real_supply():
    assert inertia(SymMat(np.diag([4.0, -1.0]))) == Inertia(1, 0, 1)
    assert inertia(SymMat(np.diag([1.0, 0.0, -2.0]))).as_tuple() == (1, 1, 1)


def test_inertia_helpers():
    i = Inertia(1, 2, 3)
    assert i.dim == 6
    assert i.swapped() == Inertia(3, 2, 1)
    assert i + Inertia(1, 0, 0) == Inertia(2, 2, 3)


def test_definiteness_thresholds():
    assert is_psd(SymMat(np.diag([1.0, -1e-9])))
    assert not is_psd(SymMat(np.diag([1.0, -1e-6])))
    assert not is_pd(SymMat(np.diag([1.0, 1e-7])))
    assert is_pd(SymMat(np.diag([1.0, 2e-6])))


def test_schur_complement_and_singular_block():
    assert schur_complement(SymMat([[2.0, 1.0], [1.0, 1.0]]), 1).allclose([[1.0]])
    with pytest.raises(SingularBlock):
        schur_complement(SymMat([[1.0, 0.0], [0.0, 0.0]]), 1)


def test_haynsworth_on_random_matrices(rng):
    for _ in range(50):
        g = rng.standard_normal((5, 5))
        a = SymMat(0.5 * (g + g.T))
        assert haynsworth_check(a, 2)


def test_quadratic_frame():
    framed = quadratic_frame(SymMat(np.diag([1.0, -1.0])), [[2.0]])
    assert framed.allclose([[-3.0]])
    with pytest.raises(SpecError):
        quadratic_frame(SymMat(np.eye(3)), np.zeros((2, 2)))


def test_split_and_inverse():
    a = SymMat([[2.0, 1.0], [1.0, 3.0]])
    a11, a12, a22 = a.split(1)
    assert a11[0, 0] == 2.0 and a12[0, 0] == 1.0 and a22[0, 0] == 3.0
    assert SymMat(a.entries @ a.inv().entries).allclose(np.eye(2))
    with pytest.raises(SpecError):
        a.split(2)
    with pytest.raises(SingularBlock):
        SymMat(np.zeros((2, 2))).inv()


def test_min_eig():
    assert min_eig(SymMat(np.diag([3.0, -2.0]))) == pytest.approx(-2.0)


def test_tolerances_validation():
    with pytest.raises(SpecError):
        Tolerances(eps_psd=1e-6, eps_strict=1e-6)
    with pytest.raises(SpecError):
        Tolerances(rtol_rank=0.0)
    with pytest.raises(SpecError):
        Tolerances(rank_band=0.5)


def _random_inertia_matrix(rng, dim):
    """Q diag(d) Q^T with d drawn from negative, zero and positive values."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = rng.integers(-1, 2, size=dim)
    d = signs * rng.uniform(0.5, 2.0, size=dim)
    return SymMat(q @ np.diag(d) @ q.T, atol_sym=np.inf), Inertia(
        int(np.sum(signs < 0)), int(np.sum(signs == 0)), int(np.sum(signs > 0)))


def test_inertia_counts_and_negation(rng):
    for _ in range(100):
        a, expected = _random_inertia_matrix(rng, int(rng.integers(1, 7)))
        assert inertia(a) == expected
        assert inertia(a).dim == a.dim
        assert inertia(-a) == expected.swapped()


def test_sylvester_congruence_invariance(rng):
    for _ in range(100):
        dim = int(rng.integers(1, 7))
        a, expected = _random_inertia_matrix(rng, dim)
        u, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        v, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        t = u @ np.diag(rng.uniform(0.5, 2.0, size=dim)) @ v
        assert inertia(a.congruence(t)) == expected


def test_pd_implies_psd(rng):
    for _ in range(200):
        g = rng.standard_normal((3, 3))
        shift = rng.choice([-1e-5, -1e-8, 0.0, 1e-7, 1e-6, 2e-6, 1.0])
        a = SymMat(g @ g.T, atol_sym=np.inf)
        a = SymMat(a.entries + (shift - min_eig(a)) * np.eye(3), atol_sym=np.inf)
        if is_pd(a):
            assert is_psd(a)


@pytest.mark.slow
def test_haynsworth_on_six_by_six(rng):
    for _ in range(100):
        g = rng.standard_normal((6, 6))
        a = SymMat(0.5 * (g + g.T))
        for k in range(1, 6):
            assert haynsworth_check(a, k)
