"""Dense real symmetric matrices: inertia, definiteness, Schur complements."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, SingularBlock, SpecError


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used by every definiteness and rank decision."""
    atol_sym: float = 1e-8
    rtol_eig: float = 1e-9
    eps_psd: float = 1e-8
    eps_strict: float = 1e-6
    rtol_rank: float = 1e-8
    rank_band: float = 10.0
    atol_residual: float = 1e-7

    def __post_init__(self):
        for name in ("atol_sym", "rtol_eig", "eps_psd", "eps_strict",
                     "rtol_rank", "atol_residual"):
            if not getattr(self, name) > 0:
                raise SpecError(f"tolerance {name} must be strictly positive")
        if not self.eps_strict > self.eps_psd:
            raise SpecError("eps_strict must exceed eps_psd")
        if not self.rank_band >= 1:
            raise SpecError("rank_band must be at least 1")


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Inertia:
    neg: int
    zero: int
    pos: int

    @property
    def dim(self) -> int:
        return self.neg + self.zero + self.pos

    def __add__(self, other: "Inertia") -> "Inertia":
        return Inertia(self.neg + other.neg, self.zero + other.zero,
                       self.pos + other.pos)

    def swapped(self) -> "Inertia":
        return Inertia(self.pos, self.zero, self.neg)

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.neg, self.zero, self.pos)


class SymMat:
    """Immutable dense symmetric matrix.

    The constructor symmetrizes its input via (A + A^T)/2 and rejects inputs
    with max|A - A^T| above the absolute tolerance ``atol_sym``.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries, atol_sym: float = DEFAULT_TOLERANCES.atol_sym):
        a = np.array(entries, dtype=float, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise SpecError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise SpecError("matrix has non-finite entries")
        asym = float(np.max(np.abs(a - a.T)))
        if asym > atol_sym:
            raise SpecError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self._entries = a

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def split(self, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return the blocks (A11, A12, A22) for a split after row/column k."""
        if not 0 < k < self.dim:
            raise SpecError(f"split {k} outside 1..{self.dim - 1}")
        a = self._entries
        return a[:k, :k], a[:k, k:], a[k:, k:]

    def leading(self, k: int) -> "SymMat":
        return SymMat(self.split(k)[0])

    def trailing(self, k: int) -> "SymMat":
        return SymMat(self.split(k)[2])

    def inv(self) -> "SymMat":
        try:
            inverse = np.linalg.inv(self._entries)
        except np.linalg.LinAlgError as exc:
            raise SingularBlock("matrix is singular") from exc
        if not np.all(np.isfinite(inverse)):
            raise SingularBlock("matrix is singular")
        return SymMat(0.5 * (inverse + inverse.T), atol_sym=np.inf)

    def congruence(self, t: np.ndarray) -> "SymMat":
        """T^T A T."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return SymMat(t.T @ self._entries @ t, atol_sym=np.inf)

    def __neg__(self) -> "SymMat":
        return SymMat(-self._entries)

    def __add__(self, other: "SymMat") -> "SymMat":
        return SymMat(self._entries + _as_array(other))

    def __sub__(self, other: "SymMat") -> "SymMat":
        return SymMat(self._entries - _as_array(other))

    def __mul__(self, scalar: float) -> "SymMat":
        return SymMat(float(scalar) * self._entries)

    __rmul__ = __mul__

    def allclose(self, other, rtol: float = 1e-10, atol: float = 1e-12) -> bool:
        b = _as_array(other)
        return b.shape == self._entries.shape and np.allclose(
            self._entries, b, rtol=rtol, atol=atol)

    def to_list(self):
        return self._entries.tolist()

    def __array__(self, dtype=None, copy=None):
        return np.array(self._entries, dtype=dtype)

    def __repr__(self) -> str:
        return f"SymMat(dim={self.dim}, entries={self._entries.tolist()!r})"


def _as_array(a) -> np.ndarray:
    return a.entries if isinstance(a, SymMat) else np.asarray(a, dtype=float)


def eigenvalues(a: SymMat) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(a.entries)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-decomposition failed: {exc}") from exc


def min_eig(a: SymMat) -> float:
    return float(eigenvalues(a)[0])


def inertia(a: SymMat, tol: Tolerances = DEFAULT_TOLERANCES) -> Inertia:
    """Count negative, zero and positive eigenvalues.

    Eigenvalues with |lambda| <= rtol_eig * max(1, spectral radius) are zero.
    """
    lam = eigenvalues(a)
    threshold = tol.rtol_eig * max(1.0, float(np.max(np.abs(lam))))
    neg = int(np.sum(lam < -threshold))
    pos = int(np.sum(lam > threshold))
    return Inertia(neg, a.dim - neg - pos, pos)


def is_psd(a: SymMat, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return min_eig(a) >= -tol.eps_psd


def is_pd(a: SymMat, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return min_eig(a) >= tol.eps_strict


def is_positive_definite_inertia(a: SymMat, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Scale-free definiteness: every eigenvalue classified positive."""
    return inertia(a, tol).pos == a.dim


def is_negative_definite_inertia(a: SymMat, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return inertia(a, tol).neg == a.dim


def schur_complement(a: SymMat, k: int, tol: Tolerances = DEFAULT_TOLERANCES) -> SymMat:
    """A11 - A12 A22^{-1} A12^T for the split after row/column k."""
    a11, a12, a22 = a.split(k)
    block22 = SymMat(a22)
    if inertia(block22, tol).zero != 0:
        raise SingularBlock(f"trailing block of size {block22.dim} is singular")
    try:
        x = sla.solve(a22, a12.T, assume_a="sym")
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularBlock("trailing block is singular") from exc
    return SymMat(a11 - a12 @ x, atol_sym=np.inf)


def haynsworth_check(a: SymMat, k: int, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """In(A) == In(A22) + In(A / A22)."""
    expected = inertia(a.trailing(k), tol) + inertia(schur_complement(a, k, tol), tol)
    return inertia(a, tol) == expected


def quadratic_frame(a: SymMat, r: np.ndarray) -> SymMat:
    """[I; R]^T A [I; R] where R has dim(A) - q rows and q columns."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    q = r.shape[1]
    if q + r.shape[0] != a.dim:
        raise SpecError(
            f"frame of shape {r.shape} does not fit a matrix of dim {a.dim}")
    return a.congruence(np.vstack([np.eye(q), r]))
