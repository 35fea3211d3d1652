"""Trajectory CSV and supply/noise JSON files."""
import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from ..errors import SpecError
from ..symmat import DEFAULT_TOLERANCES, SymMat, Tolerances
from ..sysmodel import DataRecord, NoiseModel, NoiseSpec, SupplyRate, Sys

Matrix = List[List[float]]
PathLike = Union[str, Path]


def write_atomic(path: PathLike, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from exc


def parse_json(model, text: str, path: PathLike):
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise SpecError(f"{path}: {exc.errors()[0]['msg']} at "
                        f"{'.'.join(str(x) for x in exc.errors()[0]['loc'])}") from exc


# ============================================================================
# Trajectories
# ============================================================================

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def dump_data(data: DataRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["channel"] + [str(t) for t in range(data.T + 1)])
    for prefix, block in (("u", data.U), ("x", data.X), ("y", data.Y)):
        for i, row in enumerate(block, start=1):
            cells = [_fmt(v) for v in row]
            writer.writerow([f"{prefix}{i}"] + cells + [""] * (data.T + 1 - len(cells)))
    return buf.getvalue()


def parse_data(text: str, source: str = "<data>") -> DataRecord:
    """Rows u1.., x1.., y1.. over columns 0..T; u and y leave column T empty."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or rows[0][0] != "channel":
        raise SpecError(f"{source}: missing 'channel' header")
    width = len(rows[0]) - 1
    if width < 2 or rows[0][1:] != [str(t) for t in range(width)]:
        raise SpecError(f"{source}: header must list time indices 0..T")
    T = width - 1
    blocks = {"u": [], "x": [], "y": []}
    for row in rows[1:]:
        name, cells = row[0].strip(), row[1:]
        kind = name[:1]
        if kind not in blocks or blocks[kind] is None:
            raise SpecError(f"{source}: unknown channel {name!r}")
        if name != f"{kind}{len(blocks[kind]) + 1}":
            raise SpecError(f"{source}: channel {name!r} out of order")
        count = T + 1 if kind == "x" else T
        if len(cells) < count or any(c.strip() for c in cells[count:]):
            raise SpecError(f"{source}: channel {name!r} must have {count} samples")
        try:
            blocks[kind].append([float(c) for c in cells[:count]])
        except ValueError as exc:
            raise SpecError(f"{source}: channel {name!r}: {exc}") from exc
    if not all(blocks.values()):
        raise SpecError(f"{source}: u, x and y channels are all required")
    return DataRecord(np.array(blocks["u"]), np.array(blocks["x"]), np.array(blocks["y"]))


def read_data(path: PathLike) -> DataRecord:
    return parse_data(read_text(path), str(path))


def write_data(path: PathLike, data: DataRecord) -> None:
    write_atomic(path, dump_data(data))


# ============================================================================
# Supply rates, noise models and systems
# ============================================================================

class SupplyFile(BaseModel):
    m: int
    p: int
    S: Matrix

    def to_supply(self, tol: Tolerances = DEFAULT_TOLERANCES) -> SupplyRate:
        return SupplyRate(SymMat(self.S, atol_sym=tol.atol_sym), self.m, self.p)

    @classmethod
    def from_supply(cls, S: SupplyRate) -> "SupplyFile":
        return cls(m=S.m, p=S.p, S=S.S.to_list())


class NoiseFile(BaseModel):
    model: Literal["N0", "N1", "N2"]
    rows: Optional[int] = None
    T: Optional[int] = None
    matrix: Optional[Matrix] = None

    def to_spec(self, tol: Tolerances = DEFAULT_TOLERANCES) -> NoiseSpec:
        if self.model == "N0":
            return NoiseSpec.n0()
        if self.rows is None or self.T is None or self.matrix is None:
            raise SpecError(f"{self.model} file needs rows, T and matrix")
        matrix = SymMat(self.matrix, atol_sym=tol.atol_sym)
        if matrix.dim != self.rows + self.T:
            raise SpecError(f"matrix has dim {matrix.dim}, expected rows + T = "
                            f"{self.rows + self.T}")
        if self.model == "N1":
            return NoiseSpec.n1(matrix, self.rows)
        return NoiseSpec.n2(matrix, self.T)

    @classmethod
    def from_spec(cls, spec: NoiseSpec) -> "NoiseFile":
        if spec.model is NoiseModel.N0:
            return cls(model="N0")
        return cls(model=spec.model.value, rows=spec.rows, T=spec.horizon,
                   matrix=spec.matrix.to_list())


class SystemFile(BaseModel):
    A: Matrix
    B: Matrix
    C: Matrix
    D: Matrix

    def to_sys(self) -> Sys:
        return Sys(self.A, self.B, self.C, self.D)

    @classmethod
    def from_sys(cls, sys: Sys) -> "SystemFile":
        return cls(A=sys.A.tolist(), B=sys.B.tolist(), C=sys.C.tolist(), D=sys.D.tolist())


def dump_model(model: BaseModel) -> str:
    return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def read_supply(path: PathLike, tol: Tolerances = DEFAULT_TOLERANCES) -> SupplyRate:
    return parse_json(SupplyFile, read_text(path), path).to_supply(tol)


def read_noise(path: PathLike, tol: Tolerances = DEFAULT_TOLERANCES) -> NoiseSpec:
    return parse_json(NoiseFile, read_text(path), path).to_spec(tol)


def write_supply(path: PathLike, S: SupplyRate) -> None:
    write_atomic(path, dump_model(SupplyFile.from_supply(S)))


def write_noise(path: PathLike, spec: NoiseSpec) -> None:
    write_atomic(path, dump_model(NoiseFile.from_spec(spec)))


def write_system(path: PathLike, sys: Sys) -> None:
    write_atomic(path, dump_model(SystemFile.from_sys(sys)))
