"""Versioned JSON documents describing operators and analysis jobs.

A document has three top-level fields::

    {"version": 1,
     "operators": {"T": {"kind": "shift", "blocks": 8}, ...},
     "jobs": [{"name": "cert", "kind": "certify", "block": "R"}, ...]}

Operators refer to each other by name.  Complex scalars are written either
as a number or as a ``[re, im]`` pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .operators import (
    BetaSequence,
    BlockUpper,
    WindowedOperator,
    adjoint_of,
    assemble_R,
    direct_sum,
    finite,
    left_inverse_of_weighted_shift,
    truncated_shift,
    weighted_shift,
)

__all__ = [
    "SCHEMA_VERSION",
    "SpecDocument",
    "Diagnostic",
    "SpecError",
    "Resolver",
    "load_document",
    "parse_document",
    "dump_document",
    "validate_document",
]

SCHEMA_VERSION = 1

Scalar = Union[float, tuple[float, float]]


def _to_complex(x: Scalar) -> complex:
    return complex(x[0], x[1]) if isinstance(x, tuple) else complex(x)


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

class DenseOp(_Model):
    kind: Literal["dense"]
    rows: list[list[Scalar]]

    @field_validator("rows")
    @classmethod
    def _rectangular(cls, rows):
        if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ValueError("rows must be a non-empty rectangular array")
        return rows


class DiagonalOp(_Model):
    kind: Literal["diagonal"]
    entries: list[Scalar] = Field(min_length=1)


class IdentityOp(_Model):
    kind: Literal["identity"]
    size: int = Field(ge=1)


class ZeroOp(_Model):
    kind: Literal["zero"]
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)


class RandomOp(_Model):
    """Seeded complex Gaussian matrix, optionally unitary or rescaled to ``norm``."""

    kind: Literal["random"]
    rows: int = Field(ge=1)
    cols: int | None = None
    seed: int = 0
    norm: float | None = Field(default=None, gt=0)
    unitary: bool = False


class ShiftOp(_Model):
    kind: Literal["shift"]
    blocks: int = Field(ge=2)
    block_size: int = Field(default=1, ge=1)
    guard: int | None = Field(default=None, ge=1)


class WeightedShiftOp(_Model):
    kind: Literal["weighted_shift"]
    weights: list[float] = Field(min_length=1)
    blocks: int = Field(ge=2)
    block_size: int = Field(default=1, ge=1)
    guard: int | None = Field(default=None, ge=1)

    @field_validator("weights")
    @classmethod
    def _positive(cls, w):
        if any(x <= 0 for x in w):
            raise ValueError("weights must be positive")
        return w


class AdjointOp(_Model):
    kind: Literal["adjoint"]
    of: str


class LeftInverseOp(_Model):
    kind: Literal["left_inverse"]
    of: str


class CommutatorOp(_Model):
    """``T Z - Z V``."""

    kind: Literal["commutator"]
    T: str
    V: str
    Z: str


class BlockUpperOp(_Model):
    kind: Literal["block_upper"]
    T: str
    X: str
    V: str


class DirectSumOp(_Model):
    kind: Literal["direct_sum"]
    parts: list[str] = Field(min_length=1)


class CarHankelOp(_Model):
    """``G_alpha`` (``kind = car_hankel``) or ``[[S*, G_alpha], [0, S]]`` (``foguel_hankel``)."""

    kind: Literal["car_hankel", "foguel_hankel"]
    alpha: list[Scalar]
    blocks: int = Field(ge=2)
    modes: int = Field(ge=1, le=8)


Operator = Annotated[
    Union[DenseOp, DiagonalOp, IdentityOp, ZeroOp, RandomOp, ShiftOp, WeightedShiftOp, AdjointOp,
          LeftInverseOp, CommutatorOp, BlockUpperOp, DirectSumOp, CarHankelOp],
    Field(discriminator="kind"),
]


# --------------------------------------------------------------------------
# jobs
# --------------------------------------------------------------------------

class _Job(_Model):
    name: str = Field(min_length=1)


class DiagnoseJob(_Job):
    kind: Literal["diagnose"]
    operator: str
    n_max: int = Field(default=64, ge=1)


class SylvesterJob(_Job):
    kind: Literal["sylvester"]
    block: str
    method: Literal["direct", "partial_sum"] = "direct"
    side: Literal["right", "left", "symmetric"] = "right"
    mode: Literal["plain", "cesaro"] = "plain"
    n_max: int | None = Field(default=None, ge=1)


class GrowthJob(_Job):
    kind: Literal["growth"]
    block: str
    side: Literal["right", "left", "symmetric"] = "right"
    n_max: int | None = Field(default=None, ge=1)


class DecomposeJob(_Job):
    kind: Literal["decompose"]
    block: str
    case: Literal["coisometry", "isometry", "weighted"]
    Z: str | None = None
    left_inverse: str | None = None


class CertifyJob(_Job):
    kind: Literal["certify"]
    block: str
    Z: str | None = None
    n_max: int = Field(default=64, ge=1)


class NearnessJob(_Job):
    kind: Literal["nearness"]
    T: str
    C: str
    N: int = Field(ge=0)
    weights: list[float] | None = None
    beta_from: str | None = None
    projection_blocks: list[int] | None = None

    @field_validator("weights")
    @classmethod
    def _positive(cls, w):
        if w is not None and any(x <= 0 for x in w):
            raise ValueError("weights must be positive")
        return w


class RenormJob(_Job):
    kind: Literal["renorm"]
    block: str
    M: int | None = Field(default=None, ge=0)
    samples: int = Field(default=100, ge=1)


class CarJob(_Job):
    kind: Literal["car"]
    alpha: list[Scalar]
    blocks: int = Field(ge=2)
    modes: int = Field(ge=1, le=8)


class GalleryJob(_Job):
    kind: Literal["gallery"]
    instance: str
    n_max: int = Field(default=64, ge=1)


Job = Annotated[
    Union[DiagnoseJob, SylvesterJob, GrowthJob, DecomposeJob, CertifyJob, NearnessJob, RenormJob,
          CarJob, GalleryJob],
    Field(discriminator="kind"),
]


class SpecDocument(_Model):
    version: Literal[1]
    operators: dict[str, Operator] = Field(default_factory=dict)
    jobs: list[Job] = Field(default_factory=list)

    def job(self, name: str):
        for j in self.jobs:
            if j.name == name:
                return j
        raise KeyError(f"no job named {name!r}; available: {', '.join(j.name for j in self.jobs) or 'none'}")


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


class SpecError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def _loc(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<document>"


def parse_document(text: str) -> SpecDocument:
    """Parse and schema-check; errors carry ``line:col`` or the field path."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([Diagnostic("error", f"line {exc.lineno}, column {exc.colno}", exc.msg)]) from None
    try:
        return SpecDocument.model_validate(raw)
    except ValidationError as exc:
        diags = []
        for err in exc.errors():
            # drop the discriminator tag pydantic inserts into the location
            loc = [p for p in err["loc"] if not (isinstance(p, str) and p in _TAGS and err["loc"].index(p) > 0)]
            diags.append(Diagnostic("error", _loc(loc), err["msg"]))
        raise SpecError(diags) from None


_TAGS = {
    "dense", "diagonal", "identity", "zero", "random", "shift", "weighted_shift", "adjoint",
    "left_inverse", "commutator", "block_upper", "direct_sum", "car_hankel", "foguel_hankel",
    "diagnose", "sylvester", "growth", "decompose", "certify", "nearness", "renorm", "car", "gallery",
}


def load_document(path) -> SpecDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_document(fh.read())


def dump_document(doc: SpecDocument) -> str:
    """Serialise only the fields present in the source, so parse/dump round-trips."""
    return json.dumps(doc.model_dump(mode="json", exclude_unset=True), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# resolution
# --------------------------------------------------------------------------

Resolved = Union[WindowedOperator, BlockUpper]


@dataclass
class Resolver:
    """Build operators on demand, memoised, with cycle detection."""

    doc: SpecDocument
    cache: dict[str, Resolved] = field(default_factory=dict)
    betas: dict[str, BetaSequence] = field(default_factory=dict)
    _active: list[str] = field(default_factory=list)

    def __call__(self, name: str, path: str = "") -> Resolved:
        if name in self.cache:
            return self.cache[name]
        if name not in self.doc.operators:
            raise SpecError([Diagnostic("error", path or f"operators.{name}", f"unresolved operator reference {name!r}")])
        if name in self._active:
            cycle = " -> ".join(self._active[self._active.index(name):] + [name])
            raise SpecError([Diagnostic("error", f"operators.{name}", f"reference cycle {cycle}")])
        self._active.append(name)
        try:
            op = self._build(name, self.doc.operators[name])
        except SpecError:
            raise
        except (ValueError, TypeError) as exc:
            raise SpecError([Diagnostic("error", f"operators.{name}", str(exc))]) from None
        finally:
            self._active.pop()
        self.cache[name] = op
        return op

    def window(self, name: str, path: str = "", *, assemble: bool = False) -> WindowedOperator:
        """The named matrix; block operators are refused unless ``assemble``."""
        op = self(name, path)
        if isinstance(op, BlockUpper) and assemble:
            return assemble_R(op)
        if isinstance(op, BlockUpper):
            raise SpecError([Diagnostic("error", path or f"operators.{name}", f"{name!r} is a block operator; a matrix is required")])
        return op

    def block(self, name: str, path: str = "") -> BlockUpper:
        op = self(name, path)
        if not isinstance(op, BlockUpper):
            raise SpecError([Diagnostic("error", path or f"operators.{name}", f"{name!r} is not a block_upper operator")])
        return op

    def _build(self, name: str, spec) -> Resolved:
        ref = lambda key: self.window(getattr(spec, key), f"operators.{name}.{key}")
        kind = spec.kind
        if kind == "dense":
            return finite(np.array([[_to_complex(x) for x in row] for row in spec.rows]))
        if kind == "diagonal":
            return finite(np.diag([_to_complex(x) for x in spec.entries]))
        if kind == "identity":
            return finite(np.eye(spec.size))
        if kind == "zero":
            return finite(np.zeros((spec.rows, spec.cols)))
        if kind == "random":
            return finite(_random(spec))
        if kind == "shift":
            return truncated_shift(spec.block_size, spec.blocks, spec.guard)
        if kind == "weighted_shift":
            beta = BetaSequence(tuple(spec.weights))
            self.betas[name] = beta
            return weighted_shift(beta, spec.block_size, spec.blocks, spec.guard)
        if kind == "adjoint":
            return adjoint_of(ref("of"))
        if kind == "left_inverse":
            base = ref("of")
            beta = self.betas.get(spec.of, BetaSequence.constant(1.0, base.blocks))
            if base.ambient != "shift":
                raise ValueError(f"{spec.of!r} is not a shift")
            return left_inverse_of_weighted_shift(beta, base.block_size, base.blocks)
        if kind == "commutator":
            T, V, Z = ref("T").matrix, ref("V").matrix, ref("Z").matrix
            if T.shape[1] != Z.shape[0] or Z.shape[1] != V.shape[0]:
                raise ValueError(f"T{T.shape}, Z{Z.shape}, V{V.shape} are incompatible")
            return finite(T @ Z - Z @ V)
        if kind == "block_upper":
            return BlockUpper(ref("T"), ref("X").matrix, ref("V"))
        if kind == "direct_sum":
            parts = [self.window(p, f"operators.{name}.parts") for p in spec.parts]
            return direct_sum(*parts)
        if kind in ("car_hankel", "foguel_hankel"):
            from .car import HankelSpec, foguel_hankel, hankel_gamma

            hs = HankelSpec(tuple(_to_complex(a) for a in spec.alpha), spec.blocks, spec.modes)
            return foguel_hankel(hs) if kind == "foguel_hankel" else finite(hankel_gamma(hs))
        raise ValueError(f"unknown operator kind {kind!r}")  # pragma: no cover


def _random(spec: RandomOp) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    cols = spec.rows if spec.cols is None else spec.cols
    a = rng.standard_normal((spec.rows, cols)) + 1j * rng.standard_normal((spec.rows, cols))
    if spec.unitary:
        if cols != spec.rows:
            raise ValueError("a unitary random operator must be square")
        q, r = np.linalg.qr(a)
        a = q * (np.diag(r) / np.abs(np.diag(r)))
    if spec.norm is not None:
        a = a * (spec.norm / np.linalg.norm(a, 2))
    return a


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def _guard_of(op: Resolved) -> int | None:
    ops = [op.T, op.V] if isinstance(op, BlockUpper) else [op]
    guards = [o.guard for o in ops if o.ambient == "shift"]
    return min(guards) if guards else None


def validate_document(doc: SpecDocument) -> list[Diagnostic]:
    """Resolve every operator and check job references and window feasibility."""
    diags: list[Diagnostic] = []
    res = Resolver(doc)
    for name in doc.operators:
        try:
            res(name)
        except SpecError as exc:
            diags.extend(d for d in exc.diagnostics if d not in diags)

    seen: set[str] = set()
    for i, job in enumerate(doc.jobs):
        path = f"jobs[{i}]"
        if job.name in seen:
            diags.append(Diagnostic("error", f"{path}.name", f"duplicate job name {job.name!r}"))
        seen.add(job.name)
        try:
            diags.extend(_check_job(job, res, path))
        except SpecError as exc:
            diags.extend(exc.diagnostics)
    return diags


def _window_warning(path: str, n_max: int, guard: int | None) -> list[Diagnostic]:
    if guard is not None and n_max > guard:
        return [Diagnostic("warning", f"{path}.n_max",
                           f"n_max = {n_max} exceeds the guard window {guard}; "
                           "truncated-shift powers are exact only up to the guard")]
    return []


def _check_job(job, res: Resolver, path: str) -> list[Diagnostic]:
    from .perturbation import GALLERY_NAMES

    out: list[Diagnostic] = []
    kind = job.kind
    if kind == "diagnose":
        out += _window_warning(path, job.n_max, _guard_of(res(job.operator, f"{path}.operator")))
    elif kind in ("sylvester", "growth", "decompose", "certify", "renorm"):
        b = res.block(job.block, f"{path}.block")
        n_max = getattr(job, "n_max", None)
        if n_max is not None and kind != "certify":
            out += _window_warning(path, n_max, _guard_of(b))
        if kind == "decompose":
            if job.Z is not None:
                Z = res.window(job.Z, f"{path}.Z").matrix
                if Z.shape != (b.k_dim, b.h_dim):
                    out.append(Diagnostic("error", f"{path}.Z", f"Z has shape {Z.shape}, expected {(b.k_dim, b.h_dim)}"))
            if job.case == "weighted" and job.left_inverse is None and b.V.ambient != "shift":
                out.append(Diagnostic("error", f"{path}.left_inverse", "weighted case needs a left inverse or a shift V"))
        if kind == "certify" and job.Z is not None:
            Z = res.window(job.Z, f"{path}.Z").matrix
            if Z.shape != (b.k_dim, b.h_dim):
                out.append(Diagnostic("error", f"{path}.Z", f"Z has shape {Z.shape}, expected {(b.k_dim, b.h_dim)}"))
        if kind == "renorm" and b.V.ambient != "shift":
            out.append(Diagnostic("error", f"{path}.block", "renorm needs V to be a (weighted) shift"))
    elif kind == "nearness":
        T = res.window(job.T, f"{path}.T")
        C = res.window(job.C, f"{path}.C")
        if T.shape != C.shape:
            out.append(Diagnostic("error", path, f"T has shape {T.shape} but C has shape {C.shape}"))
        if job.weights is not None and job.beta_from is not None:
            out.append(Diagnostic("error", path, "give either weights or beta_from, not both"))
        if job.beta_from is not None:
            res(job.beta_from, f"{path}.beta_from")
            if job.beta_from not in res.betas:
                out.append(Diagnostic("error", f"{path}.beta_from", f"{job.beta_from!r} is not a weighted_shift"))
            elif len(res.betas[job.beta_from].weights) < job.N:
                out.append(Diagnostic("error", f"{path}.N", f"N = {job.N} needs {job.N} weights"))
        if job.weights is not None and len(job.weights) < job.N:
            out.append(Diagnostic("error", f"{path}.weights", f"N = {job.N} needs {job.N} weights, got {len(job.weights)}"))
        if job.projection_blocks is not None:
            nb = T.blocks
            bad = [b for b in job.projection_blocks if not 0 <= b < nb]
            if bad:
                out.append(Diagnostic("error", f"{path}.projection_blocks", f"blocks {bad} outside 0..{nb - 1}"))
        out += _window_warning(path, job.N, T.guard if T.ambient == "shift" else None)
    elif kind == "car":
        from .car import HankelSpec

        try:
            HankelSpec(tuple(_to_complex(a) for a in job.alpha), job.blocks, job.modes)
        except ValueError as exc:
            out.append(Diagnostic("error", path, str(exc)))
    elif kind == "gallery":
        if job.instance not in GALLERY_NAMES:
            out.append(Diagnostic("error", f"{path}.instance",
                                  f"unknown gallery instance {job.instance!r}; available: {', '.join(GALLERY_NAMES)}"))
    return out
