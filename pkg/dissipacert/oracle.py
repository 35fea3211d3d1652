"""Independent checks used to validate verdicts and certificates.

Nothing here calls the LMI solver: trajectories are simulated, consistent
systems are sampled, and frequency responses are evaluated on a grid.
Sampling can only falsify a certificate, never prove one.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .datagen import simulate
from .errors import NotApplicable, SamplingStarved, SpecError
from .informativity import build_n1, identify_unique, least_squares_system, n1_form
from .symmat import (DEFAULT_TOLERANCES, SymMat, Tolerances, is_negative_definite_inertia,
                     min_eig, quadratic_frame, schur_complement)
from .sysmodel import (DataRecord, NoiseModel, NoiseSpec, SupplyRate, Sys, convert_noise,
                       dissipation_lmi_matrix, sigma_membership)

logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-3


@dataclass
class SampleReport:
    attempted: int = 0
    accepted: int = 0
    worst_margin: float = float("inf")
    failures: List[Any] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def merge(self, other: "SampleReport") -> "SampleReport":
        return SampleReport(
            self.attempted + other.attempted,
            self.accepted + other.accepted,
            min(self.worst_margin, other.worst_margin),
            self.failures + other.failures,
            sorted(self.seeds + other.seeds),
        )


# ============================================================================
# Trajectories
# ============================================================================

def trajectory_dissipation_check(sys: Sys, S: SupplyRate, P: SymMat, inputs: np.ndarray,
                                 x0: np.ndarray,
                                 tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """x^T P x + s(u, y) - x+^T P x+ >= -eps_psd |[x; u]|^2 at every step."""
    data = simulate(sys, inputs, x0)
    P = P.entries if isinstance(P, SymMat) else np.asarray(P, dtype=float)
    for t in range(data.T):
        x, x_next = data.X[:, t], data.X[:, t + 1]
        u, y = data.U[:, t], data.Y[:, t]
        supplied = x @ P @ x + S.value(u, y) - x_next @ P @ x_next
        if supplied < -tol.eps_psd * max(1.0, float(x @ x + u @ u)):
            logger.debug("dissipation inequality fails at step %d by %g", t, supplied)
            return False
    return True


# ============================================================================
# Sampling the consistency set
# ============================================================================

class _RaySampler:
    """Points V* + r D of a bounded quadratic set {R : [I; R]^T N [I; R] >= 0}.

    Along every ray from the center the form decreases monotonically, so the
    boundary radius is found by bisection.
    """

    def __init__(self, N: SymMat, q: int, tol: Tolerances):
        if not is_negative_definite_inertia(N.trailing(q), tol):
            raise NotApplicable("quadratic set is unbounded (trailing block not negative definite)")
        _, n12, n22 = N.split(q)
        self.N = N
        self.tol = tol
        self.center = -np.linalg.solve(n22, n12.T)
        top = float(np.max(np.linalg.eigvalsh(schur_complement(N, q, tol).entries)))
        bottom = float(np.min(np.linalg.eigvalsh(-n22)))
        self.radius = np.sqrt(max(top, 0.0) * q / bottom)

    def margin(self, R: np.ndarray) -> float:
        return min_eig(quadratic_frame(self.N, R))

    def inside(self, R: np.ndarray) -> bool:
        return self.margin(R) >= -self.tol.eps_psd

    def boundary(self, direction: np.ndarray) -> np.ndarray:
        low, high = 0.0, self.radius
        for _ in range(100):
            mid = 0.5 * (low + high)
            if self.margin(self.center + mid * direction) >= 0:
                low = mid
            else:
                high = mid
            if high - low <= 1e-13 * max(high, 1e-300):
                break
        return self.center + low * direction

    def draw(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        direction = rng.standard_normal(self.center.shape)
        direction /= np.linalg.norm(direction)
        return self.center + self.radius * rng.uniform() * direction, direction


def sample_consistent_systems(data: DataRecord, spec: NoiseSpec, count: int, seed: int = 0,
                              tol: Tolerances = DEFAULT_TOLERANCES,
                              boundary_fraction: float = 0.5) -> List[Sys]:
    """Systems explaining the data under the noise model.

    The least-squares system is included when it is a member. Random rays
    from the center of the set are accepted or rejected; a share of the
    rejected rays is bisected to the boundary, where certificates are tight.
    """
    if count < 1:
        raise SpecError("count must be positive")
    if spec.model is NoiseModel.N0:
        return [identify_unique(data, tol)]
    if spec.model is NoiseModel.N2:
        spec = convert_noise(spec, tol)
    n, m, rows = data.n, data.m, data.n + data.p
    sampler = _RaySampler(build_n1(data, spec.matrix, tol), rows, tol)
    rng = np.random.default_rng(seed)

    def as_sys(R: np.ndarray) -> Sys:
        return Sys.from_stacked(R.T, n, m)

    systems: List[Sys] = []
    estimate = least_squares_system(data)
    if sigma_membership(estimate, data, spec, tol):
        systems.append(estimate)
    systems.append(as_sys(sampler.center))
    boundary_quota = int(boundary_fraction * count)
    attempted = 0
    budget = 20 * count
    while len(systems) < count and attempted < budget:
        attempted += 1
        R, direction = sampler.draw(rng)
        if sampler.inside(R):
            systems.append(as_sys(R))
        elif boundary_quota > 0:
            boundary_quota -= 1
            systems.append(as_sys(sampler.boundary(direction)))
    systems = systems[:count]
    if attempted and len(systems) < MIN_ACCEPTANCE * attempted:
        raise SamplingStarved(f"accepted {len(systems)} of {attempted} draws",
                              systems=systems, attempted=attempted, accepted=len(systems))
    if len(systems) < count:
        logger.warning("sampled %d of %d requested systems", len(systems), count)
    return systems


def validate_certificate(data: DataRecord, spec: NoiseSpec, S: SupplyRate, P: SymMat,
                         count: int = 1000, seed: int = 0,
                         tol: Tolerances = DEFAULT_TOLERANCES,
                         margin_tol: Optional[float] = None) -> SampleReport:
    """Evaluate the model LMI with storage P on sampled consistent systems."""
    margin_tol = 10 * tol.eps_psd if margin_tol is None else margin_tol
    try:
        systems = sample_consistent_systems(data, spec, count, seed, tol)
        attempted = len(systems)
    except SamplingStarved as exc:
        logger.warning("certificate validation continues on partial samples: %s", exc)
        systems, attempted = exc.systems or [], exc.attempted
    report = SampleReport(attempted=attempted, accepted=len(systems), seeds=[seed])
    for sys in systems:
        margin = min_eig(dissipation_lmi_matrix(sys, S, P))
        report.worst_margin = min(report.worst_margin, margin)
        if margin < -margin_tol:
            report.failures.append(sys)
    return report


def s_lemma_sampling(M: SymMat, N: SymMat, dims: Tuple[int, int], samples: int,
                     seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES) -> SampleReport:
    """Search for Z with [I; Z]^T N [I; Z] >= 0 but [I; Z]^T M [I; Z] not >= 0."""
    q, r = dims
    if M.dim != q + r or N.dim != q + r:
        raise SpecError(f"matrices must have dim {q + r}")
    rng = np.random.default_rng(seed)
    report = SampleReport(seeds=[seed])
    try:
        sampler: Optional[_RaySampler] = _RaySampler(N, q, tol)
    except NotApplicable:
        sampler = None

    def record(Z: np.ndarray):
        report.accepted += 1
        margin = min_eig(quadratic_frame(M, Z))
        report.worst_margin = min(report.worst_margin, margin)
        if margin < -10 * tol.eps_psd:
            report.failures.append(Z)

    scales = (1e-2, 1e-1, 1.0, 1e1)
    while report.accepted < samples and report.attempted < 20 * samples:
        report.attempted += 1
        if sampler is not None:
            Z, direction = sampler.draw(rng)
            if not sampler.inside(Z):
                Z = sampler.boundary(direction)
        else:
            Z = scales[report.attempted % len(scales)] * rng.standard_normal((r, q))
        if min_eig(quadratic_frame(N, Z)) >= -tol.eps_psd:
            record(Z)
    if report.accepted == 0:
        raise SamplingStarved("no Z satisfies the constraint form", attempted=report.attempted)
    return report


# ============================================================================
# Frequency-domain ground truth
# ============================================================================

def _require_stable(sys: Sys):
    if sys.spectral_radius() >= 1:
        raise NotApplicable(f"A has spectral radius {sys.spectral_radius():.4g} >= 1")


def frequency_response(sys: Sys, theta: float) -> np.ndarray:
    z = np.exp(1j * theta)
    return sys.C @ np.linalg.solve(z * np.eye(sys.n) - sys.A, sys.B) + sys.D


def hinf_norm_grid(sys: Sys, grid_size: int = 10_000, refine_iters: int = 200) -> float:
    """sup over the unit circle of the largest singular value of H(z)."""
    _require_stable(sys)

    def gain(theta: float) -> float:
        return float(np.linalg.svd(frequency_response(sys, theta), compute_uv=False)[0])

    grid = np.linspace(0.0, np.pi, grid_size)
    gains = np.array([gain(theta) for theta in grid])
    k = int(np.argmax(gains))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid_size - 1)]
    refined = minimize_scalar(lambda theta: -gain(theta), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12, "maxiter": refine_iters})
    return max(float(gains[k]), float(-refined.fun))


def positive_real_grid(sys: Sys, grid_size: int = 10_000,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """H(z) + H(z)^* >= 0 at every grid point of the upper unit circle."""
    if sys.m != sys.p:
        raise SpecError("positive realness needs a square system")
    _require_stable(sys)
    for theta in np.linspace(0.0, np.pi, grid_size):
        h = frequency_response(sys, theta)
        if float(np.linalg.eigvalsh(h + h.conj().T)[0]) < -tol.eps_psd:
            return False
    return True


def n1_membership_margin(data: DataRecord, phi: SymMat, sys: Sys,
                         tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Smallest eigenvalue of the N1 form at ``sys``."""
    return min_eig(n1_form(build_n1(data, phi, tol), sys))
