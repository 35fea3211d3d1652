"""Informativity of measured data for dissipativity.

Data are informative when every system consistent with them (the set of
explanations allowed by the noise model) is dissipative with one common
storage function. Three paths are provided:

- noise-free data: full row rank of Z- plus a data-framed LMI in P;
- noise bounded by the transposed quadratic model (N1): an S-lemma LMI in
  Q = P^{-1} and a multiplier alpha >= 0;
- noise bounded by the direct model (N2): converted to N1 first.

Without full row rank of Z- the data are never informative; a pair of
consistent systems, one of which violates the dissipation inequality, is
constructed explicitly.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from .errors import (AssumptionError, DataInconsistent, NotApplicable, NumericalError,
                     SingularBlock, SpecError)
from .lmi_feas import (AffineLmiProblem, LmiConstraint, LmiSolution, LmiStatus,
                       LmiVariable, Requirement, SolveBudget, VariableKind,
                       numpy_stack, solve_feasibility)
from .symmat import (DEFAULT_TOLERANCES, SymMat, Tolerances, inertia,
                     is_negative_definite_inertia, is_positive_definite_inertia,
                     min_eig, quadratic_frame, schur_complement)
from .sysmodel import (DataRecord, DualSupplyParts, NoiseModel, NoiseSpec, SupplyRate,
                       Sys, assumption_a1, assumption_a2, convert_noise,
                       dissipation_lmi_matrix, dual_supply,
                       sigma_membership)

logger = logging.getLogger(__name__)

COUNTEREXAMPLE_BUDGET = 1000


class VerdictStatus(Enum):
    INFORMATIVE = "Informative"
    NOT_INFORMATIVE = "NotInformative"
    INCONCLUSIVE = "Inconclusive"


@dataclass(eq=False)
class CounterexamplePair:
    """Two consistent systems; sys_b maps (x, u) to (x, y) with s(u, y) < 0."""
    sys_a: Sys
    sys_b: Sys
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    supply_value: float


@dataclass
class RankReport:
    rank: int
    required: int
    sigma_max: float
    sigma_min: float
    near_threshold: bool

    @property
    def full(self) -> bool:
        return self.rank == self.required

    @property
    def ratio(self) -> float:
        return self.sigma_min / self.sigma_max if self.sigma_max > 0 else 0.0


@dataclass(eq=False)
class InformativityVerdict:
    status: VerdictStatus
    model: NoiseModel = NoiseModel.N0
    storage: Optional[SymMat] = None
    dual_storage: Optional[SymMat] = None
    multiplier: Optional[float] = None
    margins: Dict[str, float] = field(default_factory=dict)
    evidence: Optional[CounterexamplePair] = None
    rank: Optional[RankReport] = None
    reason: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def informative(self) -> bool:
        return self.status is VerdictStatus.INFORMATIVE


# ============================================================================
# Rank condition and the explicit counterexample
# ============================================================================

def rank_report(data: DataRecord, tol: Tolerances = DEFAULT_TOLERANCES) -> RankReport:
    """Numerical rank of Z- with threshold rtol_rank * sigma_max.

    ``near_threshold`` flags a smallest relevant singular value within a
    factor rank_band of the threshold, where the rank decision is fragile.
    """
    required = data.n + data.m
    sigma = np.linalg.svd(data.Z_minus, compute_uv=False)
    sigma_max = float(sigma[0]) if sigma.size else 0.0
    if sigma_max == 0.0:
        return RankReport(0, required, 0.0, 0.0, False)
    rank = int(np.sum(sigma > tol.rtol_rank * sigma_max))
    sigma_min = float(sigma[required - 1]) if sigma.size >= required else 0.0
    ratio = sigma_min / sigma_max
    near = (sigma.size >= required
            and tol.rtol_rank / tol.rank_band <= ratio <= tol.rtol_rank * tol.rank_band)
    return RankReport(rank, required, sigma_max, sigma_min, bool(near))


def rank_condition(data: DataRecord, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return rank_report(data, tol).full


def least_squares_system(data: DataRecord) -> Sys:
    """Minimum-norm solution of [A B; C D] Z- = Z+."""
    w, *_ = np.linalg.lstsq(data.Z_minus.T, data.Z_plus.T, rcond=None)
    return Sys.from_stacked(w.T, data.n, data.m)


def _residual_ok(data: DataRecord, sys: Sys, tol: Tolerances) -> bool:
    scale = max(1.0, float(np.max(np.abs(data.Z_plus))))
    return float(np.max(np.abs(data.residual(sys)))) <= tol.atol_residual * scale


def identify_unique(data: DataRecord, tol: Tolerances = DEFAULT_TOLERANCES) -> Sys:
    """The single system explaining noise-free data with full-rank Z-."""
    if not rank_condition(data, tol):
        raise NotApplicable("Z- does not have full row rank; the system is not unique")
    sys = least_squares_system(data)
    if not _residual_ok(data, sys, tol):
        raise DataInconsistent(
            "no linear system reproduces the data exactly (max residual "
            f"{np.max(np.abs(data.residual(sys))):.3e})")
    return sys


def _witness_direction(S: SupplyRate, eta: np.ndarray, xi_zero: bool):
    lam, vecs = np.linalg.eigh(S.S.entries)
    w = vecs[:, 0]
    if lam[0] >= 0:
        raise AssumptionError("supply rate has no negative direction")
    if not xi_zero:
        return w
    # xi = 0: u must satisfy eta^T u = 1, so move u along eta until s stays negative.
    if abs(float(eta @ w[:S.m])) > 1e-12:
        return w / float(eta @ w[:S.m])
    step = np.concatenate([eta, np.zeros(S.p)])
    radius = 1.0
    for _ in range(COUNTEREXAMPLE_BUDGET):
        candidate = w + radius * step
        reach = float(eta @ candidate[:S.m])
        if abs(reach) > 1e-12 and candidate @ S.S.entries @ candidate < 0:
            return candidate / reach
        radius *= 0.5
    raise NumericalError("no negative-supply input with a nonzero kernel component "
                         f"found in {COUNTEREXAMPLE_BUDGET} steps")


def counterexample_construct(data: DataRecord, spec: NoiseSpec, ref: Sys, S: SupplyRate,
                             tol: Tolerances = DEFAULT_TOLERANCES) -> CounterexamplePair:
    """Build a consistent system that violates dissipation for every storage.

    With (xi, eta) in the left kernel of Z-, the system
    ref + [zeta; theta][xi^T eta^T] explains the data as well as ``ref`` and
    maps a chosen (x, u) to (x, y) with s(u, y) < 0, so x^T P x + s(u, y)
    - x^T P x < 0 for every P.
    """
    report = rank_report(data, tol)
    if report.full:
        raise NotApplicable("Z- has full row rank; no counterexample exists")
    if not assumption_a1(S, tol):
        raise AssumptionError(f"supply rate inertia {inertia(S.S, tol).as_tuple()} "
                              f"is not ({S.p}, 0, {S.m})")
    if not sigma_membership(ref, data, spec, tol):
        raise DataInconsistent("reference system is not consistent with the data")

    n, m = data.n, data.m
    left, _, _ = np.linalg.svd(data.Z_minus, full_matrices=True)
    kernel = left[:, n + m - 1]
    kernel = kernel / np.linalg.norm(kernel)
    xi, eta = kernel[:n], kernel[n:]
    xi_zero = float(xi @ xi) <= 1e-12
    w = _witness_direction(S, eta, xi_zero)
    u, y = w[:m], w[m:]
    if xi_zero:
        x = np.zeros(n)
    else:
        x = (1.0 - float(eta @ u)) / float(xi @ xi) * xi

    zeta = x - ref.A @ x - ref.B @ u
    theta = y - ref.C @ x - ref.D @ u
    sys_b = Sys.from_stacked(ref.stacked() + np.outer(np.concatenate([zeta, theta]), kernel),
                             n, m)
    if not sigma_membership(sys_b, data, spec, tol):
        raise NumericalError("constructed system left the consistency set; "
                             f"kernel residual {report.sigma_min:.3e}")
    value = S.value(u, y)
    logger.debug("counterexample witness s(u, y) = %g", value)
    return CounterexamplePair(ref, sys_b, x, u, y, xi, eta, value)


# ============================================================================
# Noise-free data
# ============================================================================

def row_space_basis(data: DataRecord) -> np.ndarray:
    _, _, vt = np.linalg.svd(data.Z_minus, full_matrices=False)
    return vt[:data.n + data.m].T


def data_dissipation_expr(data: DataRecord, S: SupplyRate, P, basis: np.ndarray):
    """Data-framed dissipation form, compressed to the row space of Z-.

    X-^T P X- - X+^T P X+ + [U-; Y-]^T S [U-; Y-] is T x T and vanishes on
    the kernel of Z-; ``basis`` holds an orthonormal basis of its complement.
    """
    xm, xp = data.X_minus @ basis, data.X_plus @ basis
    uy = np.vstack([data.U, data.Y]) @ basis
    return xm.T @ P @ xm - xp.T @ P @ xp + uy.T @ S.S.entries @ uy


def _downgrade(verdict: InformativityVerdict, reason: str) -> InformativityVerdict:
    logger.warning("verdict %s downgraded to Inconclusive: %s", verdict.status.value, reason)
    return replace(verdict, status=VerdictStatus.INCONCLUSIVE, reason=reason)


def _require_a1(S: SupplyRate, tol: Tolerances):
    if not assumption_a1(S, tol):
        raise AssumptionError(f"supply rate inertia {inertia(S.S, tol).as_tuple()} "
                              f"is not ({S.p}, 0, {S.m})")


def _check_dims(data: DataRecord, S: SupplyRate):
    if (data.m, data.p) != (S.m, S.p):
        raise SpecError(f"supply dims {(S.m, S.p)} do not match data dims "
                        f"{(data.m, data.p)}")


def informativity_noiseless(data: DataRecord, S: SupplyRate,
                            tol: Tolerances = DEFAULT_TOLERANCES,
                            budget: SolveBudget = SolveBudget()) -> InformativityVerdict:
    _check_dims(data, S)
    _require_a1(S, tol)
    report = rank_report(data, tol)

    if not report.full:
        ref = least_squares_system(data)
        if not _residual_ok(data, ref, tol):
            raise DataInconsistent("no linear system reproduces the noise-free data")
        pair = counterexample_construct(data, NoiseSpec.n0(), ref, S, tol)
        verdict = InformativityVerdict(
            VerdictStatus.NOT_INFORMATIVE, evidence=pair, rank=report,
            reason=f"Z- has rank {report.rank} < {report.required}")
        if report.near_threshold:
            return _downgrade(verdict, f"rank decision near threshold "
                                       f"(sigma ratio {report.ratio:.3e})")
        return verdict

    identified = identify_unique(data, tol)
    basis = row_space_basis(data)
    n, dim = data.n, data.n + data.m
    prob = AffineLmiProblem(
        variables=(LmiVariable("P", VariableKind.SYMMETRIC, n),),
        constraints=(
            LmiConstraint("storage", lambda v, stack: v["P"], n),
            LmiConstraint("dissipation",
                          lambda v, stack: data_dissipation_expr(data, S, v["P"], basis),
                          dim),
        ),
    )
    sol = solve_feasibility(prob, tol, budget)
    verdict = _verdict_from_solution(sol, NoiseModel.N0, report)
    verdict.details["identified"] = identified

    if verdict.status is VerdictStatus.INFORMATIVE:
        P = SymMat(sol.value("P"))
        verdict.storage = P
        model_margin = min_eig(dissipation_lmi_matrix(identified, S, P))
        verdict.margins["model"] = model_margin
        slack = tol.eps_psd / min(1.0, report.sigma_min ** 2)
        if model_margin < -slack:
            verdict = _downgrade(verdict, "identified system fails the model LMI with "
                                          f"the data storage (margin {model_margin:.3e})")
    if report.near_threshold and verdict.status is not VerdictStatus.INCONCLUSIVE:
        verdict = _downgrade(verdict, f"rank decision near threshold "
                                      f"(sigma ratio {report.ratio:.3e})")
    return verdict


def _verdict_from_solution(sol: LmiSolution, model: NoiseModel,
                           report: Optional[RankReport]) -> InformativityVerdict:
    if sol.status is LmiStatus.FEASIBLE:
        return InformativityVerdict(VerdictStatus.INFORMATIVE, model=model,
                                    margins=dict(sol.margins), rank=report,
                                    reason="common storage found")
    if sol.status is LmiStatus.INFEASIBLE:
        reason = ("LMI infeasible" if sol.best_margin is None
                  else f"LMI infeasible (best margin {sol.best_margin:.3e})")
        return InformativityVerdict(
            VerdictStatus.NOT_INFORMATIVE, model=model, margins=dict(sol.margins),
            rank=report, reason=reason,
            details={"trace": sol.trace})
    logger.warning("LMI solve inconclusive: %s", "; ".join(sol.trace))
    return InformativityVerdict(VerdictStatus.INCONCLUSIVE, model=model,
                                margins=dict(sol.margins), rank=report,
                                reason="solver could not decide the LMI",
                                details={"trace": sol.trace})


# ============================================================================
# Noisy data
# ============================================================================

def build_n1(data: DataRecord, phi: SymMat,
             tol: Tolerances = DEFAULT_TOLERANCES) -> SymMat:
    """M^T Phi M with M = [[I, 0], [Z+^T, -Z-^T]], blocks ordered (n, p, n, m).

    Framing with [I; [A B; C D]^T] gives the noise form of the residual.
    """
    phi = phi if isinstance(phi, SymMat) else SymMat(phi, atol_sym=tol.atol_sym)
    rows, T = data.n + data.p, data.T
    if phi.dim != rows + T:
        raise SpecError(f"Phi has dim {phi.dim}, expected {rows + T}")
    if not assumption_a2(NoiseSpec.n1(phi, rows), tol):
        raise AssumptionError("Phi violates assumption A2")
    M = np.block([[np.eye(rows), np.zeros((rows, data.n + data.m))],
                  [data.Z_plus.T, -data.Z_minus.T]])
    return phi.congruence(M)


def n1_form(n1: SymMat, sys: Sys) -> SymMat:
    return quadratic_frame(n1, sys.stacked().T)


def slater_check(n1: SymMat, split: int, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Some V makes the N1 form strictly positive definite."""
    if not is_negative_definite_inertia(n1.trailing(split), tol):
        return False
    try:
        return is_positive_definite_inertia(schur_complement(n1, split, tol), tol)
    except SingularBlock:
        return False


def slater_center(n1: SymMat, split: int) -> np.ndarray:
    """The maximizer -N22^{-1} N12^T of the N1 form."""
    _, n12, n22 = n1.split(split)
    return -np.linalg.solve(n22, n12.T)


def certificate_block(Q, parts: DualSupplyParts, n: int, stack=numpy_stack):
    """[[Q,0,0,0],[0,Hh,0,-Gh^T],[0,0,-Q,0],[0,-Gh,0,Fh]] in block order (n, p, n, m)."""
    m, p = parts.m, parts.p
    z = np.zeros
    return stack([
        [Q, z((n, p)), z((n, n)), z((n, m))],
        [z((p, n)), parts.Hhat, z((p, n)), -parts.Ghat.T],
        [z((n, n)), z((n, p)), -Q, z((n, m))],
        [z((m, n)), -parts.Ghat, z((m, n)), parts.Fhat],
    ])


def informativity_noisy_n1(data: DataRecord, phi: SymMat, S: SupplyRate,
                           tol: Tolerances = DEFAULT_TOLERANCES,
                           budget: SolveBudget = SolveBudget(),
                           model: NoiseModel = NoiseModel.N1) -> InformativityVerdict:
    _check_dims(data, S)
    _require_a1(S, tol)
    n, m, p = data.n, data.m, data.p
    n1 = build_n1(data, phi, tol)
    report = rank_report(data, tol)
    if not slater_check(n1, n + p, tol):
        raise NotApplicable(
            "no system makes the noise form strictly positive (Slater condition fails); "
            f"Z- rank is {report.rank} of {n + m}")
    parts = dual_supply(S, tol)
    dim = 2 * n + m + p

    prob = AffineLmiProblem(
        variables=(LmiVariable("Q", VariableKind.SYMMETRIC, n),
                   LmiVariable("alpha", VariableKind.NONNEG_SCALAR)),
        constraints=(
            LmiConstraint("Q", lambda v, stack: v["Q"], n, Requirement.PD),
            LmiConstraint("s-lemma", lambda v, stack: certificate_block(
                v["Q"], parts, n, stack) - v["alpha"] * n1.entries, dim),
        ),
    )
    sol = solve_feasibility(prob, tol, budget)
    verdict = _verdict_from_solution(sol, model, report)
    verdict.details["slater_center"] = slater_center(n1, n + p)
    if report.near_threshold:
        logger.warning("Z- is close to rank deficient (sigma ratio %.3e)", report.ratio)
        verdict.details["rank_warning"] = (f"Z- singular value ratio {report.ratio:.3e} "
                                           "is near the rank threshold")
    if verdict.status is VerdictStatus.INFORMATIVE:
        Q = SymMat(sol.value("Q"))
        verdict.dual_storage = Q
        verdict.storage = Q.inv()
        verdict.multiplier = float(sol.value("alpha"))
        verdict.margins["storage"] = min_eig(verdict.storage)
    return verdict


def informativity_noisy_n2(data: DataRecord, theta: SymMat, S: SupplyRate,
                           tol: Tolerances = DEFAULT_TOLERANCES,
                           budget: SolveBudget = SolveBudget()) -> InformativityVerdict:
    theta = theta if isinstance(theta, SymMat) else SymMat(theta, atol_sym=tol.atol_sym)
    if theta.dim != data.T + data.n + data.p:
        raise SpecError(f"Theta has dim {theta.dim}, expected {data.T + data.n + data.p}")
    converted = convert_noise(NoiseSpec.n2(theta, data.T), tol)
    return informativity_noisy_n1(data, converted.matrix, S, tol, budget, NoiseModel.N2)


def s_lemma_certificate_check(M: SymMat, N: SymMat, alpha: float,
                              tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """M - alpha N >= -eps_psd I with alpha >= 0."""
    if M.dim != N.dim:
        raise SpecError(f"dimension mismatch {M.dim} vs {N.dim}")
    if alpha < 0:
        return False
    return min_eig(SymMat(M.entries - alpha * N.entries, atol_sym=np.inf)) >= -tol.eps_psd


def replay_dual_certificate(sys: Sys, S: SupplyRate, Q: SymMat, alpha: float, n1: SymMat,
                            tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Frame the S-lemma certificate with [I; [A B; C D]^T] for a consistent system.

    The framed certificate equals the dual dissipation LMI with storage Q
    minus alpha times the (nonnegative) noise form, so the returned smallest
    eigenvalue of the dual dissipation LMI is at least the framed margin.
    """
    parts = dual_supply(S, tol)
    certificate = certificate_block(Q.entries, parts, sys.n) - alpha * n1.entries
    framed = quadratic_frame(SymMat(certificate, atol_sym=np.inf), sys.stacked().T)
    dual = dissipation_lmi_matrix(sys.dual(), parts.as_supply(), Q)
    gap = dual.entries - alpha * n1_form(n1, sys).entries - framed.entries
    if np.max(np.abs(gap)) > 1e-8 * max(1.0, float(np.max(np.abs(dual.entries)))):
        raise NumericalError(f"framed certificate deviates from the dual LMI by "
                             f"{np.max(np.abs(gap)):.3e}")
    return min_eig(dual)


def check(data: DataRecord, S: SupplyRate, spec: NoiseSpec,
          tol: Tolerances = DEFAULT_TOLERANCES,
          budget: SolveBudget = SolveBudget()) -> InformativityVerdict:
    """Run the test that matches the noise model."""
    if spec.model is NoiseModel.N0:
        return informativity_noiseless(data, S, tol, budget)
    if (spec.rows, spec.horizon) != (data.n + data.p, data.T):
        raise SpecError(f"{spec.model.value} model is for {spec.rows} channels over "
                        f"{spec.horizon} samples, data have {data.n + data.p} over {data.T}")
    if spec.model is NoiseModel.N1:
        return informativity_noisy_n1(data, spec.matrix, S, tol, budget)
    return informativity_noisy_n2(data, spec.matrix, S, tol, budget)
