import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from dissipacert.datagen import random_stable_sys, simulate
from dissipacert.symmat import SymMat
from dissipacert.sysmodel import SupplyRate, Sys


@pytest.fixture
def scalar_sys():
    """x+ = 0.5 x + u, y = x; H-infinity norm 2."""
    return Sys([[0.5]], [[1.0]], [[1.0]], [[0.0]])


@pytest.fixture
def passive_sys():
    """x+ = 0.5 x + u, y = x + u; Re H >= 1/3 on the unit circle."""
    return Sys([[0.5]], [[1.0]], [[1.0]], [[1.0]])


@pytest.fixture
def scalar_data(scalar_sys):
    return simulate(scalar_sys, [[1.0, -1.0, 1.0]], [0.0])


@pytest.fixture
def positive_real():
    return SupplyRate.positive_real(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _random_a2_matrix(rng, q, r):
    g = rng.standard_normal((r, r))
    m22 = -(g @ g.T + np.eye(r))
    m12 = rng.standard_normal((q, r))
    h = rng.standard_normal((q, q))
    m11 = m12 @ np.linalg.solve(m22, m12.T) + h @ h.T + np.eye(q)
    m = np.block([[m11, m12], [m12.T, m22]])
    return 0.5 * (m + m.T)


def _random_a1_supply(rng, m, p):
    t = rng.standard_normal((m + p, m + p)) + 3 * np.eye(m + p)
    d = np.diag(np.concatenate([rng.uniform(0.5, 2.0, m), -rng.uniform(0.5, 2.0, p)]))
    s = t.T @ d @ t
    return SupplyRate(0.5 * (s + s.T), m, p)


@pytest.fixture
def random_a2_matrix():
    """Builds matrices split after q with a negative definite trailing block
    and a positive definite Schur complement."""
    return _random_a2_matrix


@pytest.fixture
def random_a1_supply():
    """Builds supply rates with inertia (p, 0, m)."""
    return _random_a1_supply


def _bounded_real_near_threshold(seed, factor):
    """A system, a storage P and a bounded-real supply with L(P) at the edge.

    P solves P - A^T P A = C^T C + I, which fixes the state block of L(P) to
    I; gamma^2 = factor * g0 with g0 the smallest value keeping L(P) >= 0.
    """
    rng = np.random.default_rng(seed)
    n, m, p = (int(k) for k in rng.integers(1, 4, size=3))
    sys = random_stable_sys((n, m, p), 0.9, seed=seed)
    P = solve_discrete_lyapunov(sys.A.T, sys.C.T @ sys.C + np.eye(n))
    P = 0.5 * (P + P.T)
    K = sys.A.T @ P @ sys.B + sys.C.T @ sys.D
    g0 = float(np.linalg.eigvalsh(sys.B.T @ P @ sys.B + sys.D.T @ sys.D + K.T @ K)[-1])
    return sys, SymMat(P), SupplyRate.bounded_real(float(np.sqrt(factor * g0)), m, p)




@pytest.fixture
def bounded_real_edge():
    """Builds (sys, P, S) with L(P) positive definite for factor > 1 and
    indefinite for factor < 1."""
    return _bounded_real_near_threshold
