"""Reproducible test systems, trajectories and noise realizations."""
import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .errors import AssumptionError, NotApplicable, NumericalError, SpecError
from .informativity import rank_condition
from .symmat import DEFAULT_TOLERANCES, SymMat, Tolerances, min_eig, schur_complement
from .sysmodel import (DataRecord, NoiseModel, NoiseSpec, SupplyRate, Sys, assumption_a2,
                       convert_noise, noise_form)

logger = logging.getLogger(__name__)

MAX_RANK_RETRIES = 10

Matrix = List[List[float]]


# ============================================================================
# Scenario configuration
# ============================================================================

class ExplicitSystem(BaseModel):
    kind: Literal["explicit"] = "explicit"
    A: Matrix
    B: Matrix
    C: Matrix
    D: Matrix


class RandomStableSystem(BaseModel):
    kind: Literal["random-stable"] = "random-stable"
    spectral_radius_bound: float = Field(0.9, gt=0, lt=1)


class RandomInputs(BaseModel):
    kind: Literal["random"] = "random"
    scale: float = Field(1.0, gt=0)


class ExplicitInputs(BaseModel):
    kind: Literal["explicit"] = "explicit"
    values: Matrix


class NoiseConfig(BaseModel):
    """Noise drawn inside an energy or per-sample bound and scaled to a fill fraction."""
    kind: Literal["none", "energy", "sample-norm"] = "none"
    level: float = Field(1e-2, gt=0)
    fill: float = Field(0.5, gt=0, lt=1)
    form: Literal["N1", "N2"] = "N1"


class SupplyConfig(BaseModel):
    kind: Literal["positive-real", "bounded-real", "explicit"] = "bounded-real"
    gamma: float = Field(2.0, gt=0)
    S: Optional[Matrix] = None


class ScenarioConfig(BaseModel):
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    p: int = Field(ge=1)
    T: Optional[int] = Field(None, ge=1)
    system: Union[ExplicitSystem, RandomStableSystem] = Field(
        default_factory=RandomStableSystem, discriminator="kind")
    inputs: Union[RandomInputs, ExplicitInputs] = Field(
        default_factory=RandomInputs, discriminator="kind")
    x0: Optional[List[float]] = None
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    supply: SupplyConfig = Field(default_factory=SupplyConfig)
    require_rank: bool = True
    seed: int = 0

    @model_validator(mode="after")
    def _check_dims(self):
        if isinstance(self.inputs, ExplicitInputs):
            u = np.asarray(self.inputs.values, dtype=float)
            if u.ndim != 2 or u.shape[0] != self.m:
                raise ValueError(f"explicit inputs must have {self.m} rows")
            if self.T is not None and u.shape[1] != self.T:
                raise ValueError(f"explicit inputs have {u.shape[1]} samples, T={self.T}")
        if self.x0 is not None and len(self.x0) != self.n:
            raise ValueError(f"x0 must have {self.n} entries")
        if self.supply.kind == "explicit" and self.supply.S is None:
            raise ValueError("explicit supply needs S")
        if self.supply.kind == "positive-real" and self.m != self.p:
            raise ValueError("positive-real supply needs m == p")
        return self

    @property
    def horizon(self) -> int:
        """T, defaulting to 2(n+m) samples."""
        if isinstance(self.inputs, ExplicitInputs):
            return len(self.inputs.values[0])
        return self.T if self.T is not None else 2 * (self.n + self.m)


@dataclass(eq=False)
class Scenario:
    config: ScenarioConfig
    system: Sys
    data: DataRecord
    supply: SupplyRate
    noise: NoiseSpec
    seed: int


# ============================================================================
# Generators
# ============================================================================

def simulate(sys: Sys, inputs: np.ndarray, x0: np.ndarray,
             noise: Optional[np.ndarray] = None) -> DataRecord:
    """Roll x(t+1) = A x + B u + w, y = C x + D u + z forward over the inputs.

    ``noise`` stacks w (first n rows) over z (last p rows).
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    x0 = np.ravel(np.asarray(x0, dtype=float))
    n, p = sys.n, sys.p
    if inputs.shape[0] != sys.m or x0.shape != (n,):
        raise SpecError(f"inputs {inputs.shape} or x0 {x0.shape} do not fit the system")
    T = inputs.shape[1]
    if noise is None:
        noise = np.zeros((n + p, T))
    noise = np.atleast_2d(np.asarray(noise, dtype=float))
    if noise.shape != (n + p, T):
        raise SpecError(f"noise has shape {noise.shape}, expected {(n + p, T)}")
    X = np.zeros((n, T + 1))
    Y = np.zeros((p, T))
    X[:, 0] = x0
    for t in range(T):
        X[:, t + 1] = sys.A @ X[:, t] + sys.B @ inputs[:, t] + noise[:n, t]
        Y[:, t] = sys.C @ X[:, t] + sys.D @ inputs[:, t] + noise[n:, t]
    return DataRecord(inputs, X, Y)


def random_stable_sys(dims: Tuple[int, int, int], spectral_radius_bound: float = 0.9,
                      seed: int = 0) -> Sys:
    if not 0 < spectral_radius_bound < 1:
        raise SpecError("spectral radius bound must lie in (0, 1)")
    n, m, p = dims
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    target = spectral_radius_bound * rng.uniform(0.5, 1.0)
    A = A * (target / radius) if radius > 0 else np.zeros((n, n))
    return Sys(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
               rng.standard_normal((p, m)))


def _frame_variable(spec: NoiseSpec, R: np.ndarray) -> np.ndarray:
    """Map the framed variable back to V: R = V^T for N1 and R = V for N2."""
    return R.T if spec.model is NoiseModel.N1 else R


def noise_scaled_to_model(spec: NoiseSpec, rows: int, T: int, rho: float, seed: int = 0,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Noise V with lambda_min of the model form equal to (1 - rho) times its maximum.

    V = center + c G with G Gaussian; along this ray the smallest eigenvalue
    of the form decreases monotonically in c, so c is found by bisection.
    """
    if spec.model is NoiseModel.N0:
        raise NotApplicable("noise-free model admits no noise")
    if not 0 < rho < 1:
        raise SpecError("fill fraction must lie in (0, 1)")
    if (spec.rows, spec.horizon) != (rows, T):
        raise SpecError(f"model is for {spec.rows} channels over {spec.horizon} samples")
    if not assumption_a2(spec, tol):
        raise AssumptionError(f"{spec.model.value} model violates assumption A2")

    _, m12, m22 = spec.matrix.split(spec.split)
    center = -np.linalg.solve(m22, m12.T)
    peak = min_eig(schur_complement(spec.matrix, spec.split, tol))
    target = (1.0 - rho) * peak
    direction = np.random.default_rng(seed).standard_normal(center.shape)

    def smallest(c: float) -> float:
        return min_eig(noise_form(_frame_variable(spec, center + c * direction), spec))

    high = 1.0
    while smallest(high) > target:
        high *= 2.0
        if high > 1e12:
            raise NumericalError("noise scaling did not bracket the target")
    low = 0.0
    for _ in range(200):
        mid = 0.5 * (low + high)
        if smallest(mid) > target:
            low = mid
        else:
            high = mid
        if high - low <= 1e-14 * high:
            break
    return _frame_variable(spec, center + low * direction)


def _supply(config: ScenarioConfig, tol: Tolerances) -> SupplyRate:
    if config.supply.kind == "positive-real":
        return SupplyRate.positive_real(config.m)
    if config.supply.kind == "bounded-real":
        return SupplyRate.bounded_real(config.supply.gamma, config.m, config.p)
    return SupplyRate(SymMat(config.supply.S, atol_sym=tol.atol_sym), config.m, config.p)


def _noise_spec(config: ScenarioConfig, T: int, tol: Tolerances) -> NoiseSpec:
    rows = config.n + config.p
    if config.noise.kind == "none":
        return NoiseSpec.n0()
    if config.noise.kind == "energy":
        spec = NoiseSpec.energy_bound(config.noise.level * np.eye(rows), T)
    else:
        spec = NoiseSpec.sample_norm_bound(config.noise.level, rows, T)
    return convert_noise(spec, tol) if config.noise.form == "N2" else spec


def generate_scenario(config: ScenarioConfig,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> Scenario:
    """Draw a scenario, retrying with a new seed while Z- lacks full row rank."""
    T = config.horizon
    supply = _supply(config, tol)
    noise_spec = _noise_spec(config, T, tol)
    randomized = (isinstance(config.system, RandomStableSystem)
                  or isinstance(config.inputs, RandomInputs) or config.x0 is None)
    retries = MAX_RANK_RETRIES if config.require_rank and randomized else 1

    for attempt in range(retries):
        seed = config.seed + attempt
        sys_seq, input_seq, state_seq, noise_seq = np.random.SeedSequence(seed).spawn(4)
        if isinstance(config.system, ExplicitSystem):
            s = config.system
            system = Sys(s.A, s.B, s.C, s.D)
            if (system.n, system.m, system.p) != (config.n, config.m, config.p):
                raise SpecError("explicit system does not match the configured dims")
        else:
            system = random_stable_sys((config.n, config.m, config.p),
                                       config.system.spectral_radius_bound,
                                       int(sys_seq.generate_state(1)[0]))
        if isinstance(config.inputs, ExplicitInputs):
            inputs = np.asarray(config.inputs.values, dtype=float)
        else:
            inputs = config.inputs.scale * np.random.default_rng(input_seq).standard_normal(
                (config.m, T))
        if config.x0 is not None:
            x0 = np.asarray(config.x0, dtype=float)
        else:
            x0 = np.random.default_rng(state_seq).standard_normal(config.n)
        noise = None
        if noise_spec.model is not NoiseModel.N0:
            noise = noise_scaled_to_model(noise_spec, config.n + config.p, T,
                                          config.noise.fill,
                                          int(noise_seq.generate_state(1)[0]), tol)
        data = simulate(system, inputs, x0, noise)
        if not config.require_rank or rank_condition(data, tol):
            return Scenario(config, system, data, supply, noise_spec, seed)
        logger.warning("scenario seed %d gave rank-deficient data, retrying", seed)
    raise NumericalError(f"rank condition not met after {retries} attempts")
