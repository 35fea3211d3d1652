"""Runtime settings, read from DISSIPACERT_* environment variables."""
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .lmi_feas import SolveBudget
from .symmat import Tolerances


class Config(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="DISSIPACERT_", extra="ignore")

    # Numerical tolerances
    atol_sym: float = 1e-8
    rtol_eig: float = 1e-9
    eps_psd: float = 1e-8
    eps_strict: float = 1e-6
    rtol_rank: float = 1e-8
    rank_band: float = 10.0
    atol_residual: float = 1e-7

    # LMI solver
    solver: str = "CLARABEL"
    max_iters: int = 500
    time_limit: float = 60.0
    variable_bound: float = 1e5
    margin_cap: float = 1.0

    seed: int = 0
    log_level: str = "WARNING"

    @field_validator("solver")
    @classmethod
    def _upper_solver(cls, value: str) -> str:
        return value.upper()

    def tolerances(self) -> Tolerances:
        return Tolerances(
            atol_sym=self.atol_sym,
            rtol_eig=self.rtol_eig,
            eps_psd=self.eps_psd,
            eps_strict=self.eps_strict,
            rtol_rank=self.rtol_rank,
            rank_band=self.rank_band,
            atol_residual=self.atol_residual,
        )

    def budget(self) -> SolveBudget:
        return SolveBudget(
            solver=self.solver,
            max_iters=self.max_iters,
            time_limit=self.time_limit,
            variable_bound=self.variable_bound,
            margin_cap=self.margin_cap,
        )
