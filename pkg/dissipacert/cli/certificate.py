"""Certificate documents and their solver-free verification."""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional

import numpy as np
from pydantic import BaseModel

from .. import __version__
from ..errors import DissipacertError, SingularBlock
from ..informativity import (CounterexamplePair, InformativityVerdict, build_n1,
                             certificate_block, data_dissipation_expr, identify_unique,
                             rank_report, s_lemma_certificate_check, row_space_basis)
from ..symmat import SymMat, Tolerances, min_eig
from ..sysmodel import (DataRecord, NoiseModel, NoiseSpec, SupplyRate, convert_noise,
                        dissipation_lmi_matrix, dual_supply, sigma_membership)
from .formats import Matrix, PathLike, SystemFile, dump_model

logger = logging.getLogger(__name__)

FORMAT = "dissipacert-certificate/1"
MARGIN_RTOL = 1e-6

EXIT_INFORMATIVE = 0
EXIT_NOT_INFORMATIVE = 1
EXIT_UNDECIDED = 2
EXIT_ERROR = 3
EXIT_USAGE = 64
EXIT_HASH_MISMATCH = 65

Verdict = Literal["Informative", "NotInformative", "Inconclusive", "NotApplicable",
                  "AssumptionError"]


class CertificateMetadata(BaseModel):
    tool_version: str = __version__
    seed: int = 0
    solver: str = ""
    tolerances: Dict[str, float] = {}


class CounterexamplePayload(BaseModel):
    sys_a: SystemFile
    sys_b: SystemFile
    x: List[float]
    u: List[float]
    y: List[float]
    xi: List[float]
    eta: List[float]
    supply_value: float

    @classmethod
    def from_pair(cls, pair: CounterexamplePair) -> "CounterexamplePayload":
        return cls(sys_a=SystemFile.from_sys(pair.sys_a), sys_b=SystemFile.from_sys(pair.sys_b),
                   x=pair.x.tolist(), u=pair.u.tolist(), y=pair.y.tolist(),
                   xi=pair.xi.tolist(), eta=pair.eta.tolist(),
                   supply_value=pair.supply_value)


class CertificateDocument(BaseModel):
    format: str = FORMAT
    metadata: CertificateMetadata
    problem_hash: str
    verdict: Verdict
    model: Literal["N0", "N1", "N2"]
    reason: str = ""
    storage: Optional[Matrix] = None
    dual_storage: Optional[Matrix] = None
    multiplier: Optional[float] = None
    margins: Dict[str, float] = {}
    counterexample: Optional[CounterexamplePayload] = None
    digest: str = ""

    def body_digest(self) -> str:
        body = self.model_dump(mode="json", exclude={"digest"})
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()

    def sealed(self) -> "CertificateDocument":
        return self.model_copy(update={"digest": self.body_digest()})

    def dumps(self) -> str:
        return dump_model(self)


def problem_hash(paths: Iterable[PathLike]) -> str:
    """sha256 over the data, supply and noise files, in that order."""
    h = hashlib.sha256()
    for path in paths:
        content = Path(path).read_bytes()
        h.update(len(content).to_bytes(8, "big"))
        h.update(content)
    return h.hexdigest()


def _metadata(tol: Tolerances, solver: str, seed: int) -> CertificateMetadata:
    return CertificateMetadata(seed=seed, solver=solver, tolerances={
        "atol_sym": tol.atol_sym, "rtol_eig": tol.rtol_eig, "eps_psd": tol.eps_psd,
        "eps_strict": tol.eps_strict, "rtol_rank": tol.rtol_rank,
        "atol_residual": tol.atol_residual})


def from_verdict(verdict: InformativityVerdict, digest: str, tol: Tolerances,
                 solver: str = "", seed: int = 0) -> CertificateDocument:
    return CertificateDocument(
        metadata=_metadata(tol, solver, seed),
        problem_hash=digest,
        verdict=verdict.status.value,
        model=verdict.model.value,
        reason=verdict.reason,
        storage=verdict.storage.to_list() if verdict.storage is not None else None,
        dual_storage=(verdict.dual_storage.to_list()
                      if verdict.dual_storage is not None else None),
        multiplier=verdict.multiplier,
        margins=dict(verdict.margins),
        counterexample=(CounterexamplePayload.from_pair(verdict.evidence)
                        if verdict.evidence is not None else None),
    ).sealed()


def undecided(status: Verdict, model: str, reason: str, digest: str, tol: Tolerances,
              solver: str = "", seed: int = 0) -> CertificateDocument:
    return CertificateDocument(metadata=_metadata(tol, solver, seed), problem_hash=digest,
                               verdict=status, model=model, reason=reason).sealed()


# ============================================================================
# Verification
# ============================================================================

@dataclass
class VerifyOutcome:
    exit_code: int
    messages: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_INFORMATIVE


def _close(recorded: float, recomputed: float) -> bool:
    return abs(recorded - recomputed) <= MARGIN_RTOL * max(abs(recorded), abs(recomputed)) + 1e-12


def _compare_margins(doc: CertificateDocument, recomputed: Dict[str, float],
                     messages: List[str]) -> bool:
    ok = set(doc.margins) == set(recomputed)
    if not ok:
        messages.append(f"margin keys {sorted(doc.margins)} differ from {sorted(recomputed)}")
    for name, value in recomputed.items():
        recorded = doc.margins.get(name)
        if recorded is not None and not _close(recorded, value):
            messages.append(f"margin {name!r}: recorded {recorded:.10g}, recomputed {value:.10g}")
            ok = False
    return ok


def _noiseless_margins(doc: CertificateDocument, data: DataRecord, S: SupplyRate,
                       tol: Tolerances, messages: List[str]) -> Dict[str, float]:
    P = SymMat(doc.storage, atol_sym=tol.atol_sym)
    margins = {"storage": min_eig(P),
               "dissipation": min_eig(SymMat(
                   data_dissipation_expr(data, S, P.entries, row_space_basis(data)),
                   atol_sym=np.inf))}
    if "model" in doc.margins:
        margins["model"] = min_eig(dissipation_lmi_matrix(identify_unique(data, tol), S, P))
    if not rank_report(data, tol).full:
        messages.append("Z- does not have full row rank")
    for name in ("storage", "dissipation"):
        if margins[name] < -tol.eps_psd:
            messages.append(f"{name} margin {margins[name]:.3e} is negative")
    return margins


def _noisy_margins(doc: CertificateDocument, data: DataRecord, S: SupplyRate,
                   spec: NoiseSpec, tol: Tolerances, messages: List[str]) -> Dict[str, float]:
    if doc.dual_storage is None or doc.multiplier is None:
        messages.append("certificate lacks Q or alpha")
        return {}
    if spec.model is NoiseModel.N2:
        spec = convert_noise(spec, tol)
    Q = SymMat(doc.dual_storage, atol_sym=tol.atol_sym)
    alpha = float(doc.multiplier)
    n1 = build_n1(data, spec.matrix, tol)
    block = SymMat(certificate_block(Q.entries, dual_supply(S, tol), data.n), atol_sym=np.inf)
    if not s_lemma_certificate_check(block, n1, alpha, tol):
        messages.append("S-lemma certificate fails the eigenvalue check")
    margins = {"Q": min_eig(Q),
               "s-lemma": min_eig(SymMat(block.entries - alpha * n1.entries, atol_sym=np.inf))}
    if margins["Q"] < tol.eps_strict:
        messages.append(f"Q is not positive definite (margin {margins['Q']:.3e})")
    if doc.storage is not None:
        P = SymMat(doc.storage, atol_sym=tol.atol_sym)
        margins["storage"] = min_eig(P)
        try:
            if not P.allclose(Q.inv(), rtol=1e-8, atol=1e-10):
                messages.append("storage P is not the inverse of Q")
        except SingularBlock:
            messages.append("Q is singular")
    return margins


def _counterexample_checks(doc: CertificateDocument, data: DataRecord, S: SupplyRate,
                           spec: NoiseSpec, tol: Tolerances, messages: List[str]) -> None:
    ce = doc.counterexample
    sys_a, sys_b = ce.sys_a.to_sys(), ce.sys_b.to_sys()
    x, u, y = (np.asarray(v, dtype=float) for v in (ce.x, ce.u, ce.y))
    for name, sys in (("sys_a", sys_a), ("sys_b", sys_b)):
        if not sigma_membership(sys, data, spec, tol):
            messages.append(f"{name} is not consistent with the data")
    value = S.value(u, y)
    if not value < 0:
        messages.append(f"witness supply {value:.3e} is not negative")
    if not _close(ce.supply_value, value):
        messages.append("recorded witness supply differs from the recomputed one")
    scale = max(1.0, float(np.max(np.abs(np.concatenate([x, u, y])))))
    if (np.max(np.abs(sys_b.A @ x + sys_b.B @ u - x)) > tol.atol_residual * scale
            or np.max(np.abs(sys_b.C @ x + sys_b.D @ u - y)) > tol.atol_residual * scale):
        messages.append("sys_b does not map the witness (x, u) to (x, y)")


def verify_certificate(doc: CertificateDocument, data: DataRecord, S: SupplyRate,
                       spec: NoiseSpec, digest: str, tol: Tolerances) -> VerifyOutcome:
    """Replay a certificate with eigenvalue computations only."""
    if doc.problem_hash != digest:
        return VerifyOutcome(EXIT_HASH_MISMATCH, ["certificate was issued for other inputs"])
    messages: List[str] = []
    if doc.digest != doc.body_digest():
        messages.append("certificate body does not match its digest")
    if doc.model != spec.model.value:
        messages.append(f"certificate is for {doc.model}, noise file is {spec.model.value}")

    if doc.verdict == "Informative":
        if doc.storage is None and doc.dual_storage is None:
            messages.append("Informative certificate carries no storage")
        else:
            try:
                if spec.model is NoiseModel.N0:
                    margins = _noiseless_margins(doc, data, S, tol, messages)
                else:
                    margins = _noisy_margins(doc, data, S, spec, tol, messages)
                _compare_margins(doc, margins, messages)
            except DissipacertError as exc:
                messages.append(f"replay failed: {exc}")
    elif doc.verdict == "NotInformative" and doc.counterexample is not None:
        try:
            _counterexample_checks(doc, data, S, spec, tol, messages)
        except DissipacertError as exc:
            messages.append(f"replay failed: {exc}")
    else:
        messages.append(f"{doc.verdict} certificate carries nothing to replay")
        return VerifyOutcome(EXIT_UNDECIDED, messages)

    for message in messages:
        logger.warning("verification: %s", message)
    return VerifyOutcome(EXIT_NOT_INFORMATIVE if messages else EXIT_INFORMATIVE, messages)
