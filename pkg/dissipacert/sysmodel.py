"""Systems, supply rates, measured data and noise models."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import (AssumptionError, InconclusiveError, NotApplicable,
                     SingularBlock, SingularSupply, SpecError)
from .lmi_feas import (AffineLmiProblem, LmiConstraint, LmiStatus, LmiVariable,
                       SolveBudget, VariableKind, numpy_stack, solve_feasibility)
from .symmat import (DEFAULT_TOLERANCES, Inertia, SymMat, Tolerances, inertia,
                     is_negative_definite_inertia, is_positive_definite_inertia,
                     min_eig, quadratic_frame, schur_complement)

logger = logging.getLogger(__name__)


def _matrix(a, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.array(a, dtype=float))
    if arr.ndim != 2:
        raise SpecError(f"{name} must be a matrix")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


# ============================================================================
# Systems
# ============================================================================

@dataclass(frozen=True, eq=False)
class Sys:
    """A candidate explanation x+ = Ax + Bu, y = Cx + Du."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, _matrix(getattr(self, name), name))
        n, m, p = self.A.shape[0], self.B.shape[1], self.C.shape[0]
        if min(n, m, p) < 1:
            raise SpecError("system dimensions must be positive")
        if (self.A.shape != (n, n) or self.B.shape != (n, m)
                or self.C.shape != (p, n) or self.D.shape != (p, m)):
            raise SpecError(
                f"inconsistent blocks A{self.A.shape} B{self.B.shape} "
                f"C{self.C.shape} D{self.D.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def stacked(self) -> np.ndarray:
        """[[A, B], [C, D]]."""
        return np.block([[self.A, self.B], [self.C, self.D]])

    @classmethod
    def from_stacked(cls, w: np.ndarray, n: int, m: int) -> "Sys":
        w = np.asarray(w, dtype=float)
        return cls(w[:n, :n], w[:n, n:n + m], w[n:, :n], w[n:, n:n + m])

    def dual(self) -> "Sys":
        """(A^T, C^T, B^T, D^T): inputs and outputs swap roles."""
        return Sys(self.A.T, self.C.T, self.B.T, self.D.T)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


# ============================================================================
# Supply rates
# ============================================================================

@dataclass(frozen=True)
class SupplyRate:
    """s(u, y) = [u; y]^T S [u; y] with S partitioned as [[F, G], [G^T, H]]."""
    S: SymMat
    m: int
    p: int
    a1_asserted: bool = False

    def __post_init__(self):
        if not isinstance(self.S, SymMat):
            object.__setattr__(self, "S", SymMat(self.S))
        if self.m < 1 or self.p < 1 or self.S.dim != self.m + self.p:
            raise SpecError(f"supply matrix of dim {self.S.dim} does not split as "
                            f"m={self.m}, p={self.p}")
        if self.a1_asserted and not assumption_a1(self):
            raise AssumptionError(
                f"S has inertia {inertia(self.S).as_tuple()}, expected "
                f"({self.p}, 0, {self.m})")

    @classmethod
    def positive_real(cls, m: int) -> "SupplyRate":
        eye, zero = np.eye(m), np.zeros((m, m))
        return cls(SymMat(np.block([[zero, eye], [eye, zero]])), m, m, True)

    @classmethod
    def bounded_real(cls, gamma: float, m: int, p: int) -> "SupplyRate":
        if not gamma > 0:
            raise SpecError("gamma must be positive")
        diag = np.concatenate([np.full(m, gamma ** 2), -np.ones(p)])
        return cls(SymMat(np.diag(diag)), m, p, True)

    @property
    def F(self) -> np.ndarray:
        return self.S.entries[:self.m, :self.m]

    @property
    def G(self) -> np.ndarray:
        return self.S.entries[:self.m, self.m:]

    @property
    def H(self) -> np.ndarray:
        return self.S.entries[self.m:, self.m:]

    def value(self, u, y) -> float:
        w = np.concatenate([np.ravel(u), np.ravel(y)])
        return float(w @ self.S.entries @ w)


@dataclass(frozen=True, eq=False)
class DualSupplyParts:
    Fhat: np.ndarray
    Ghat: np.ndarray
    Hhat: np.ndarray
    Shat: SymMat
    m: int
    p: int

    def as_supply(self) -> SupplyRate:
        """The dual supply rate, with input dimension p and output dimension m."""
        return SupplyRate(self.Shat, self.p, self.m)


def assumption_a1(S: SupplyRate, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return inertia(S.S, tol) == Inertia(S.p, 0, S.m)


def dualize_quadratic_set(psi: SymMat, q: int,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> SymMat:
    """Xi = [[0, -I_r], [I_q, 0]] Psi^{-1} [[0, -I_q], [I_r, 0]].

    ``psi`` is split after its first q rows; the result is split after r.
    """
    r = psi.dim - q
    if q < 1 or r < 1:
        raise SpecError(f"split {q} outside 1..{psi.dim - 1}")
    if inertia(psi, tol).zero != 0:
        raise SingularBlock("quadratic-set matrix is singular")
    inverse = psi.inv().entries
    left = np.block([[np.zeros((r, q)), -np.eye(r)], [np.eye(q), np.zeros((q, r))]])
    right = np.block([[np.zeros((q, r)), -np.eye(q)], [np.eye(r), np.zeros((r, q))]])
    return SymMat(left @ inverse @ right, atol_sym=np.inf)


def dual_supply(S: SupplyRate, tol: Tolerances = DEFAULT_TOLERANCES) -> DualSupplyParts:
    try:
        shat = dualize_quadratic_set(S.S, S.m, tol)
        neg_inv = -S.S.inv().entries
    except SingularBlock as exc:
        raise SingularSupply("supply matrix S is singular") from exc
    m = S.m
    return DualSupplyParts(neg_inv[:m, :m], neg_inv[:m, m:], neg_inv[m:, m:],
                           shat, S.m, S.p)


# ============================================================================
# Data
# ============================================================================

@dataclass(frozen=True, eq=False)
class DataRecord:
    """Measured U- (m x T), X (n x T+1) and Y- (p x T)."""
    U: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        for name in "UXY":
            object.__setattr__(self, name, _matrix(getattr(self, name), name))
        T = self.U.shape[1]
        if T < 1:
            raise SpecError("data must contain at least one sample")
        if self.X.shape[1] != T + 1 or self.Y.shape[1] != T:
            raise SpecError(
                f"column counts disagree: U has {T}, X has {self.X.shape[1]}, "
                f"Y has {self.Y.shape[1]}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.U.shape[1]

    @property
    def X_minus(self) -> np.ndarray:
        return self.X[:, :-1]

    @property
    def X_plus(self) -> np.ndarray:
        return self.X[:, 1:]

    @property
    def Z_minus(self) -> np.ndarray:
        return np.vstack([self.X_minus, self.U])

    @property
    def Z_plus(self) -> np.ndarray:
        return np.vstack([self.X_plus, self.Y])

    def residual(self, sys: "Sys") -> np.ndarray:
        """V := Z+ - [A B; C D] Z-."""
        if (sys.n, sys.m, sys.p) != (self.n, self.m, self.p):
            raise SpecError(f"system dims {(sys.n, sys.m, sys.p)} do not match data "
                            f"dims {(self.n, self.m, self.p)}")
        return self.Z_plus - sys.stacked() @ self.Z_minus


# ============================================================================
# Noise models
# ============================================================================

class NoiseModel(Enum):
    N0 = "N0"
    N1 = "N1"
    N2 = "N2"


@dataclass(frozen=True)
class NoiseSpec:
    """N0: V = 0.  N1: [I; V^T]^T Phi [I; V^T] >= 0.  N2: [I; V]^T Theta [I; V] >= 0.

    ``split`` is the size of the leading block: n+p for N1, T for N2.
    """
    model: NoiseModel
    matrix: Optional[SymMat] = None
    split: Optional[int] = None

    def __post_init__(self):
        if self.model is NoiseModel.N0:
            if self.matrix is not None:
                raise SpecError("N0 takes no parameter matrix")
            return
        if self.matrix is None or self.split is None:
            raise SpecError(f"{self.model.value} needs a matrix and a split")
        if not isinstance(self.matrix, SymMat):
            object.__setattr__(self, "matrix", SymMat(self.matrix))
        if not 0 < self.split < self.matrix.dim:
            raise SpecError(f"split {self.split} outside 1..{self.matrix.dim - 1}")

    @classmethod
    def n0(cls) -> "NoiseSpec":
        return cls(NoiseModel.N0)

    @classmethod
    def n1(cls, phi, rows: int) -> "NoiseSpec":
        return cls(NoiseModel.N1, SymMat(phi), rows)

    @classmethod
    def n2(cls, theta, T: int) -> "NoiseSpec":
        return cls(NoiseModel.N2, SymMat(theta), T)

    @property
    def rows(self) -> Optional[int]:
        """Number of noise channels n+p."""
        if self.model is NoiseModel.N1:
            return self.split
        if self.model is NoiseModel.N2:
            return self.matrix.dim - self.split
        return None

    @property
    def horizon(self) -> Optional[int]:
        if self.model is NoiseModel.N1:
            return self.matrix.dim - self.split
        if self.model is NoiseModel.N2:
            return self.split
        return None

    @classmethod
    def energy_bound(cls, phi11, T: int) -> "NoiseSpec":
        """V V^T <= Phi11, i.e. Phi = diag(Phi11, -I_T)."""
        phi11 = SymMat(phi11)
        rows = phi11.dim
        phi = np.block([[phi11.entries, np.zeros((rows, T))],
                        [np.zeros((T, rows)), -np.eye(T)]])
        return cls.n1(phi, rows)

    @classmethod
    def sample_norm_bound(cls, eps: float, rows: int, T: int) -> "NoiseSpec":
        """||v(t)||^2 <= eps for every t, relaxed to V V^T <= T eps I."""
        return cls.energy_bound(T * eps * np.eye(rows), T)

    @classmethod
    def covariance_bound(cls, bound, T: int, epsilon: float = 0.0) -> "NoiseSpec":
        """Sample-covariance bound, Phi22 = -(I - J/T)/(T-1) - epsilon I.

        Without regularization Phi22 is singular (its kernel is the ones
        vector), so assumption A2 fails; ``epsilon > 0`` is the minimal fix.
        """
        if T < 2:
            raise SpecError("a sample covariance needs T >= 2")
        bound = SymMat(bound)
        rows = bound.dim
        phi22 = -(np.eye(T) - np.ones((T, T)) / T) / (T - 1) - epsilon * np.eye(T)
        if epsilon <= 0:
            logger.warning("covariance noise model is not regularized; "
                           "assumption A2 does not hold")
        else:
            logger.warning("covariance noise model regularized with epsilon=%g", epsilon)
        phi = np.block([[bound.entries, np.zeros((rows, T))],
                        [np.zeros((T, rows)), phi22]])
        return cls.n1(phi, rows)


def assumption_a2(spec: NoiseSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Bounded with nonempty interior: trailing block < 0 and Schur complement > 0."""
    if spec.model is NoiseModel.N0:
        raise NotApplicable("assumption A2 concerns the N1 and N2 models only")
    trailing = spec.matrix.trailing(spec.split)
    if not is_negative_definite_inertia(trailing, tol):
        return False
    try:
        schur = schur_complement(spec.matrix, spec.split, tol)
    except SingularBlock:
        return False
    return is_positive_definite_inertia(schur, tol)


def noise_form(V: np.ndarray, spec: NoiseSpec) -> SymMat:
    """The quadratic form whose semidefiniteness defines membership."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape != (spec.rows, spec.horizon):
        raise SpecError(f"noise of shape {V.shape} does not match the "
                        f"{spec.model.value} model ({spec.rows}, {spec.horizon})")
    if spec.model is NoiseModel.N1:
        return quadratic_frame(spec.matrix, V.T)
    return quadratic_frame(spec.matrix, V)


def noise_membership(V: np.ndarray, spec: NoiseSpec,
                     tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    if spec.model is NoiseModel.N0:
        V = np.asarray(V, dtype=float)
        return bool(V.size == 0 or np.max(np.abs(V)) <= tol.atol_residual)
    return min_eig(noise_form(V, spec)) >= -tol.eps_psd


def sigma_membership(sys: Sys, data: DataRecord, spec: NoiseSpec,
                     tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return noise_membership(data.residual(sys), spec, tol)


def convert_noise(spec: NoiseSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> NoiseSpec:
    """Switch between the N1 and N2 descriptions of the same noise set."""
    if spec.model is NoiseModel.N0:
        raise NotApplicable("N0 has no dual description")
    if not assumption_a2(spec, tol):
        raise AssumptionError(
            f"{spec.model.value} model violates assumption A2; conversion needs "
            f"a bounded set with nonempty interior")
    dual = dualize_quadratic_set(spec.matrix, spec.split, tol)
    other = NoiseModel.N2 if spec.model is NoiseModel.N1 else NoiseModel.N1
    return NoiseSpec(other, dual, spec.matrix.dim - spec.split)


# ============================================================================
# Model-based dissipativity
# ============================================================================

def dissipation_lmi_expr(sys: Sys, S: SupplyRate, P, stack=numpy_stack):
    """[I 0; A B]^T diag(P, -P) [I 0; A B] + [0 I; C D]^T S [0 I; C D].

    ``P`` may be a numpy array or a cvxpy variable (with ``stack=cp.bmat``).
    """
    n, m = sys.n, sys.m
    left = np.hstack([np.eye(n), np.zeros((n, m))])
    right = np.hstack([sys.A, sys.B])
    lower = np.block([[np.zeros((m, n)), np.eye(m)], [sys.C, sys.D]])
    return left.T @ P @ left - right.T @ P @ right + lower.T @ S.S.entries @ lower


def _check_dims(sys: Sys, S: SupplyRate, P_dim: Optional[int] = None):
    if (sys.m, sys.p) != (S.m, S.p):
        raise SpecError(f"supply dims {(S.m, S.p)} do not match system dims "
                        f"{(sys.m, sys.p)}")
    if P_dim is not None and P_dim != sys.n:
        raise SpecError(f"storage of dim {P_dim} for a system with n={sys.n}")


def dissipation_lmi_matrix(sys: Sys, S: SupplyRate, P) -> SymMat:
    P = P if isinstance(P, SymMat) else SymMat(P)
    _check_dims(sys, S, P.dim)
    return SymMat(dissipation_lmi_expr(sys, S, P.entries), atol_sym=np.inf)


def dual_dissipation_lmi_matrix(sys: Sys, S: SupplyRate, P,
                                tol: Tolerances = DEFAULT_TOLERANCES) -> SymMat:
    """The dissipation LMI of the dual system with storage P^{-1} and supply S-hat."""
    P = P if isinstance(P, SymMat) else SymMat(P)
    _check_dims(sys, S, P.dim)
    return dissipation_lmi_matrix(sys.dual(), dual_supply(S, tol).as_supply(), P.inv())


def is_dissipative_model(sys: Sys, S: SupplyRate, tol: Tolerances = DEFAULT_TOLERANCES,
                         budget: SolveBudget = SolveBudget()) -> Optional[SymMat]:
    """Storage P >= 0 with L(P) >= 0, or None when the LMI is infeasible."""
    _check_dims(sys, S)
    n, m = sys.n, sys.m
    prob = AffineLmiProblem(
        variables=(LmiVariable("P", VariableKind.SYMMETRIC, n),),
        constraints=(
            LmiConstraint("storage", lambda v, stack: v["P"], n),
            LmiConstraint("dissipation",
                          lambda v, stack: dissipation_lmi_expr(sys, S, v["P"], stack),
                          n + m),
        ),
    )
    sol = solve_feasibility(prob, tol, budget)
    if sol.status is LmiStatus.FEASIBLE:
        return SymMat(sol.value("P"))
    if sol.status is LmiStatus.INFEASIBLE:
        return None
    raise InconclusiveError("model-based dissipativity LMI is inconclusive", sol)
