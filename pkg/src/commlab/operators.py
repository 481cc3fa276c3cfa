"""Finite windows of shift-type operators and 2x2 block operators.

A truncated shift on ``N`` blocks of size ``d`` is the hard cutoff of the
unilateral shift on ``l^2(C^d)``: the last block is sent to zero.  Products
of at most ``guard`` shift steps applied to vectors supported in the first
``N - guard`` blocks agree exactly with the infinite-dimensional operator,
which is what makes the identity checks in this package exact rather than
approximate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import DEFAULT_TOL, ToleranceConfig, as_matrix, operator_norm

__all__ = [
    "WindowedOperator",
    "BetaSequence",
    "BlockUpper",
    "PowerProfile",
    "StructureReport",
    "finite",
    "truncated_shift",
    "weighted_shift",
    "left_inverse_of_weighted_shift",
    "adjoint_of",
    "assemble_R",
    "extract_blocks",
    "direct_sum",
    "block_projection",
    "power_profile",
    "classify_growth",
    "structural_predicates",
]


@dataclass(frozen=True)
class WindowedOperator:
    """A matrix together with the truncation it represents.

    ``ambient`` is ``"finite"`` (a genuine finite-dimensional operator) or
    ``"shift"`` (a section of an operator on ``l^2(C^d)`` cut at ``blocks``
    blocks).  ``guard`` counts shift steps that stay exact; for finite
    operators it equals ``blocks`` and has no effect.
    """

    matrix: np.ndarray
    ambient: str = "finite"
    block_size: int = 1
    blocks: int = 1
    guard: int = 1

    def __post_init__(self) -> None:
        m = as_matrix(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.ambient not in ("finite", "shift"):
            raise ValueError(f"unknown ambient {self.ambient!r}")
        if self.ambient == "shift":
            n = self.block_size * self.blocks
            if m.shape != (n, n):
                raise ValueError(
                    f"shift-ambient operator must be {n}x{n} (d={self.block_size}, "
                    f"N={self.blocks}), got {m.shape}"
                )
            if not 0 <= self.guard <= self.blocks:
                raise ValueError(f"guard {self.guard} outside 0..{self.blocks}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def adjoint(self) -> "WindowedOperator":
        return adjoint_of(self)

    def window_projection(self) -> np.ndarray:
        """Orthogonal projection onto the blocks where on-window identities hold."""
        if self.ambient == "finite":
            return np.eye(self.shape[1], dtype=np.complex128)
        return block_projection(self.block_size, self.blocks, range(self.guard))


def finite(matrix) -> WindowedOperator:
    m = as_matrix(matrix)
    return WindowedOperator(m, "finite", 1, m.shape[0], m.shape[0])


def adjoint_of(op: WindowedOperator) -> WindowedOperator:
    return WindowedOperator(op.matrix.conj().T, op.ambient, op.block_size, op.blocks, op.guard)


def block_projection(d: int, N: int, which) -> np.ndarray:
    """Diagonal projection onto the listed blocks of ``(C^d)^N``."""
    diag = np.zeros(d * N)
    for b in which:
        diag[b * d:(b + 1) * d] = 1.0
    return np.diag(diag).astype(np.complex128)


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaSequence:
    """Shift weights ``w_k`` and their running products ``beta(n)``.

    ``beta(0) = 1`` and ``beta(n) = w_0 * ... * w_{n-1}``.
    """

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if any(not (x > 0 and math.isfinite(x)) for x in w):
            raise ValueError(f"weights must be strictly positive and finite: {w}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def constant(cls, value: float, count: int) -> "BetaSequence":
        return cls((value,) * count)

    @classmethod
    def from_products(cls, beta: Sequence[float]) -> "BetaSequence":
        beta = [float(b) for b in beta]
        if not beta or beta[0] != 1.0:
            raise ValueError("products must start with beta(0) = 1")
        return cls(tuple(beta[i + 1] / beta[i] for i in range(len(beta) - 1)))

    @property
    def products(self) -> np.ndarray:
        return np.concatenate(([1.0], np.cumprod(self.weights)))

    def beta(self, n: int) -> float:
        if n > len(self.weights):
            raise IndexError(f"beta({n}) needs {n} weights, only {len(self.weights)} stored")
        return float(self.products[n])

    def ratio_sup(self) -> float:
        """``max beta(n+k)/beta(n)`` over the stored window."""
        b = self.products
        # for each n the max over k >= 0 of b[n+k] is a suffix maximum
        suffix_max = np.maximum.accumulate(b[::-1])[::-1]
        return float(np.max(suffix_max / b))


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def truncated_shift(d: int, N: int, guard: int | None = None) -> WindowedOperator:
    """Forward shift on ``N`` blocks of ``C^d``; the last block is annihilated."""
    if d < 1 or N < 2:
        raise ValueError(f"truncated_shift needs d >= 1 and N >= 2, got d={d}, N={N}")
    m = np.kron(np.eye(N, k=-1), np.eye(d)).astype(np.complex128)
    return WindowedOperator(m, "shift", d, N, N - 1 if guard is None else guard)


def weighted_shift(beta: BetaSequence, d: int, N: int, guard: int | None = None) -> WindowedOperator:
    """``S e_{n,j} = w_n e_{n+1,j}`` for ``n < N-1``."""
    if len(beta.weights) < N - 1:
        raise ValueError(f"need {N - 1} weights for {N} blocks, got {len(beta.weights)}")
    if d < 1 or N < 2:
        raise ValueError(f"weighted_shift needs d >= 1 and N >= 2, got d={d}, N={N}")
    m = np.kron(np.diag(beta.weights[: N - 1], k=-1), np.eye(d)).astype(np.complex128)
    return WindowedOperator(m, "shift", d, N, N - 1 if guard is None else guard)


def left_inverse_of_weighted_shift(beta: BetaSequence, d: int, N: int) -> WindowedOperator:
    """``L(y_0, y_1, ...) = (y_1/w_0, y_2/w_1, ...)``; ``L S = I`` on blocks ``0..N-2``."""
    inv = [1.0 / w for w in beta.weights[: N - 1]]
    m = np.kron(np.diag(inv, k=1), np.eye(d)).astype(np.complex128)
    return WindowedOperator(m, "shift", d, N, N - 1)


# --------------------------------------------------------------------------
# block operators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockUpper:
    """The triple ``(T, X, V)`` standing for ``[[T, X], [0, V]]``."""

    T: WindowedOperator
    X: np.ndarray
    V: WindowedOperator

    def __post_init__(self) -> None:
        x = as_matrix(self.X)
        x.setflags(write=False)
        object.__setattr__(self, "X", x)
        k, h = self.T.shape[0], self.V.shape[0]
        if self.T.shape[0] != self.T.shape[1] or self.V.shape[0] != self.V.shape[1]:
            raise ValueError("diagonal blocks of R(X) must be square")
        if x.shape != (k, h):
            raise ValueError(f"X must be {k}x{h} to sit between T {self.T.shape} and V {self.V.shape}, got {x.shape}")

    @property
    def k_dim(self) -> int:
        return self.T.shape[0]

    @property
    def h_dim(self) -> int:
        return self.V.shape[0]

    def with_X(self, X) -> "BlockUpper":
        return BlockUpper(self.T, X, self.V)


def assemble_R(b: BlockUpper) -> WindowedOperator:
    """Matrix ``[[T, X], [0, V]]``.

    The result is a finite-ambient operator; the guard of the pair is kept
    so callers can size power sweeps.
    """
    k, h = b.k_dim, b.h_dim
    m = np.zeros((k + h, k + h), dtype=np.complex128)
    m[:k, :k] = b.T.matrix
    m[:k, k:] = b.X
    m[k:, k:] = b.V.matrix
    guard = min(b.T.guard, b.V.guard)
    return WindowedOperator(m, "finite", 1, k + h, guard)


def extract_blocks(R, k_dim: int, like: BlockUpper | None = None) -> BlockUpper:
    """Inverse of :func:`assemble_R`; window metadata is copied from ``like``."""
    m = R.matrix if isinstance(R, WindowedOperator) else as_matrix(R)
    if np.any(m[k_dim:, :k_dim] != 0):
        raise ValueError("lower-left block is not zero; not an upper block operator")
    if like is None:
        T, V = finite(m[:k_dim, :k_dim]), finite(m[k_dim:, k_dim:])
    else:
        T = WindowedOperator(m[:k_dim, :k_dim].copy(), like.T.ambient, like.T.block_size, like.T.blocks, like.T.guard)
        V = WindowedOperator(m[k_dim:, k_dim:].copy(), like.V.ambient, like.V.block_size, like.V.blocks, like.V.guard)
    return BlockUpper(T, m[:k_dim, k_dim:].copy(), V)


def direct_sum(*ops: WindowedOperator) -> WindowedOperator:
    mats = [op.matrix for op in ops]
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=np.complex128)
    i = 0
    for m in mats:
        out[i:i + m.shape[0], i:i + m.shape[1]] = m
        i += m.shape[0]
    return WindowedOperator(out, "finite", 1, n, min(op.guard for op in ops))


# --------------------------------------------------------------------------
# power profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerProfile:
    norms: tuple[float, ...]
    growth: str
    slope: float
    rate: float
    truncated: bool = False
    warnings: tuple[str, ...] = field(default=())

    @property
    def sup(self) -> float:
        return max(self.norms)

    @property
    def bounded(self) -> bool:
        return self.growth == "bounded" and not self.truncated


def classify_growth(values: Sequence[float], *, start: int = 3,
                    bounded_slope: float = 0.25) -> tuple[str, float, float]:
    """Growth class of a nonnegative sequence indexed from 0.

    Fits ``log v_n`` against ``log n`` (polynomial slope) and against ``n``
    (exponential rate) on the second half of the sequence (and ``n >= start``),
    so that a transient which later saturates is not read as growth.  Returns
    ``(label, slope, rate)`` with label one of ``bounded``, ``linear``,
    ``polynomial``, ``exponential``.
    """
    v = np.asarray(values, dtype=float)
    n = np.arange(v.size, dtype=float)
    keep = (n >= max(start, v.size // 2)) & (v > 0)
    if keep.sum() < 3:
        return "bounded", 0.0, 0.0
    x, y = n[keep], np.log(v[keep])
    poly = np.polyfit(np.log(x), y, 1)
    expo = np.polyfit(x, y, 1)
    slope, rate = float(poly[0]), float(expo[0])
    res_poly = float(np.sum((np.polyval(poly, np.log(x)) - y) ** 2))
    res_expo = float(np.sum((np.polyval(expo, x) - y) ** 2))
    if slope < bounded_slope:
        return "bounded", slope, rate
    if rate > 0.02 and res_expo < res_poly:
        return "exponential", slope, rate
    if slope < 1.5:
        return "linear", slope, rate
    return "polynomial", slope, rate


def power_profile(A, n_max: int, cfg: ToleranceConfig = DEFAULT_TOL, *,
                  overflow: float = 1e150) -> PowerProfile:
    """Norms ``||A^n||`` for ``n = 0..n_max`` with a growth classification."""
    op = A if isinstance(A, WindowedOperator) else finite(A)
    m = op.matrix
    notes: list[str] = []
    if op.ambient == "shift" and n_max > op.guard:
        notes.append(f"n_max={n_max} exceeds guard {op.guard}; powers beyond the guard see the truncation")
    norms = [1.0 if m.shape[0] else 0.0]
    p = np.eye(m.shape[0], dtype=np.complex128)
    truncated = False
    for _ in range(n_max):
        p = p @ m
        value = operator_norm(p, cfg) if np.any(p) else 0.0
        if not math.isfinite(value) or value > overflow:
            truncated = True
            notes.append(f"profile truncated at n={len(norms)}: norm above {overflow:.1e}")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
            break
        norms.append(value)
    if truncated:
        growth, slope, rate = "exponential", math.inf, math.inf
    else:
        growth, slope, rate = classify_growth(norms)
    return PowerProfile(tuple(norms), growth, slope, rate, truncated, tuple(notes))


# --------------------------------------------------------------------------
# structural predicates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureReport:
    isometry_on_window: bool
    coisometry_on_window: bool
    contraction: bool
    unitary_on_window: bool
    isometry_residual: float
    coisometry_residual: float
    norm: float
    window: str


def structural_predicates(A, cfg: ToleranceConfig = DEFAULT_TOL) -> StructureReport:
    """Isometry/coisometry/contraction tests restricted to the guard window.

    ``A*A = I`` is checked on the window blocks (columns), and so is
    ``AA* = I``.  For finite operators the window is the whole space.
    """
    op = A if isinstance(A, WindowedOperator) else finite(A)
    m = op.matrix
    eye = np.eye(m.shape[0], dtype=np.complex128)
    P = op.window_projection()
    iso = operator_norm((m.conj().T @ m - eye) @ P, cfg) if np.any(P) else 0.0
    coiso = operator_norm((m @ m.conj().T - eye) @ P, cfg) if np.any(P) else 0.0
    nrm = operator_norm(m, cfg)
    tol = cfg.identity_tol
    if op.ambient == "finite":
        window = "whole space"
    else:
        window = f"blocks 0..{op.guard - 1} of {op.blocks} (block size {op.block_size})"
    iso_ok, coiso_ok = iso <= tol, coiso <= tol
    return StructureReport(iso_ok, coiso_ok, nrm <= 1 + tol, iso_ok and coiso_ok, iso, coiso, nrm, window)
