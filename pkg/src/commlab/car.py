"""CAR-valued Hankel operators and the Foguel-Hankel block ``[[S*, G], [0, S]]``.

Generators come from the Jordan-Wigner construction on ``m`` modes::

    C_j = Z (x) ... (x) Z (x) s (x) I (x) ... (x) I      (j factors of Z)

with ``s = [[0, 1], [0, 0]]`` and ``Z = diag(1, -1)``.  The entries are
integers, so both anticommutation relations hold exactly in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .linalg import DEFAULT_TOL, ToleranceConfig, operator_norm
from .operators import BlockUpper, WindowedOperator, block_projection, truncated_shift

__all__ = [
    "MODE_CAP",
    "CarAlgebra",
    "HankelSpec",
    "car_generators",
    "car_relation_residuals",
    "hankel_gamma",
    "weighted_hankel",
    "intertwining_residual",
    "gamma_n_identity_check",
    "a_alpha",
    "b_alpha",
    "WeightedHankelReport",
    "weighted_hankel_bound_check",
    "foguel_hankel",
    "foguel_diagonal",
    "first_block_projection",
]

MODE_CAP = 8

_SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
_PARITY = np.diag([1.0, -1.0]).astype(np.complex128)


@dataclass(frozen=True)
class CarAlgebra:
    modes: int
    generators: tuple[np.ndarray, ...]

    @property
    def dimension(self) -> int:
        return 2 ** self.modes


@lru_cache(maxsize=None)
def _generators(m: int) -> tuple[np.ndarray, ...]:
    out = []
    for j in range(m):
        factors = [_PARITY] * j + [_SIGMA_MINUS] + [np.eye(2, dtype=np.complex128)] * (m - j - 1)
        g = factors[0]
        for f in factors[1:]:
            g = np.kron(g, f)
        g.setflags(write=False)
        out.append(g)
    return tuple(out)


def car_generators(m: int, cap: int = MODE_CAP) -> CarAlgebra:
    if m < 1:
        raise ValueError("need at least one mode")
    if m > cap:
        raise ValueError(f"{m} modes exceeds the cap of {cap} (dimension {2 ** cap})")
    return CarAlgebra(m, _generators(m))


def car_relation_residuals(alg: CarAlgebra) -> tuple[float, float]:
    """Max entrywise residuals of ``{C_i, C_j} = 0`` and ``{C_i, C_j*} = delta_ij I``."""
    eye = np.eye(alg.dimension)
    anti = mixed = 0.0
    for i, ci in enumerate(alg.generators):
        for j, cj in enumerate(alg.generators):
            anti = max(anti, float(np.max(np.abs(ci @ cj + cj @ ci))))
            target = eye if i == j else 0.0
            mixed = max(mixed, float(np.max(np.abs(ci @ cj.conj().T + cj.conj().T @ ci - target))))
    return anti, mixed


# --------------------------------------------------------------------------
# Hankel operators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HankelSpec:
    """Finitely supported ``alpha``, window ``blocks`` and CAR ``modes``.

    Block ``(i, j)`` of the Hankel matrix is ``alpha_{i+j} C_{i+j}``; only
    indices below ``len(alpha)`` are nonzero, so ``modes >= len(alpha)``
    suffices for every generator that is actually used.
    """

    alpha: tuple[complex, ...]
    blocks: int
    modes: int

    def __post_init__(self) -> None:
        alpha = tuple(complex(a) for a in self.alpha)
        while alpha and alpha[-1] == 0:
            alpha = alpha[:-1]
        object.__setattr__(self, "alpha", alpha)
        if self.blocks < 2:
            raise ValueError("need at least two blocks")
        if self.modes < max(len(alpha), 1):
            raise ValueError(f"alpha has support of length {len(alpha)} but only {self.modes} modes")
        if self.modes > MODE_CAP:
            raise ValueError(f"{self.modes} modes exceeds the cap of {MODE_CAP}")

    @property
    def support(self) -> int:
        return len(self.alpha)

    @property
    def block_size(self) -> int:
        return 2 ** self.modes

    def coefficient(self, k: int) -> complex:
        return self.alpha[k] if k < len(self.alpha) else 0.0


def _hankel(spec: HankelSpec, weight) -> np.ndarray:
    gens = car_generators(spec.modes).generators
    d, N = spec.block_size, spec.blocks
    out = np.zeros((d * N, d * N), dtype=np.complex128)
    for i in range(N):
        for j in range(N):
            a = spec.coefficient(i + j)
            if a != 0:
                out[i * d:(i + 1) * d, j * d:(j + 1) * d] = weight(i, j) * a * gens[i + j]
    return out


def hankel_gamma(spec: HankelSpec) -> np.ndarray:
    """``[alpha_{i+j} C_{i+j}]`` on ``blocks x blocks`` blocks."""
    return _hankel(spec, lambda i, j: 1.0)


def weighted_hankel(spec: HankelSpec) -> np.ndarray:
    """``[(j+1) alpha_{i+j} C_{i+j}]``."""
    return _hankel(spec, lambda i, j: j + 1.0)


def _shift(spec: HankelSpec) -> WindowedOperator:
    return truncated_shift(spec.block_size, spec.blocks)


def intertwining_residual(spec: HankelSpec, cfg: ToleranceConfig = DEFAULT_TOL) -> float:
    """``||S* G - G S||`` on the window (exact once the support fits in it)."""
    S = _shift(spec).matrix
    G = hankel_gamma(spec)
    diff = S.conj().T @ G - G @ S
    return operator_norm(diff, cfg) if np.any(diff) else 0.0


def gamma_n_identity_check(spec: HankelSpec, n_max: int | None = None,
                           cfg: ToleranceConfig = DEFAULT_TOL) -> list[float]:
    """Residuals ``||G_n - n G S^{n-1}||`` for ``n = 1..n_max``.

    ``G_n = sum_{j<n} S*^j G S^{n-j-1}`` is read off the upper-right block of
    ``R(G)^n`` rather than summed, so the check also covers the power formula
    of the block operator.
    """
    shift = _shift(spec)
    if n_max is None:
        n_max = shift.guard
    S = shift.matrix
    G = hankel_gamma(spec)
    k = S.shape[0]
    R = np.block([[S.conj().T, G], [np.zeros_like(S), S]])
    power = np.eye(2 * k, dtype=np.complex128)
    s_power = np.eye(k, dtype=np.complex128)
    out = []
    for n in range(1, n_max + 1):
        power = power @ R
        diff = power[:k, k:] - n * G @ s_power
        out.append(operator_norm(diff, cfg) if np.any(diff) else 0.0)
        s_power = s_power @ S
    return out


def a_alpha(alpha: Sequence[complex]) -> float:
    """``sup_k (k+1)^2 sum_{i>=k} |alpha_i|^2``."""
    sq = np.abs(np.asarray(alpha, dtype=np.complex128)) ** 2
    if sq.size == 0:
        return 0.0
    tails = np.cumsum(sq[::-1])[::-1]
    return float(np.max((np.arange(sq.size) + 1.0) ** 2 * tails))


def b_alpha(alpha: Sequence[complex]) -> float:
    """``sum_k (k+1)^2 |alpha_k|^2``."""
    sq = np.abs(np.asarray(alpha, dtype=np.complex128)) ** 2
    return math.fsum((np.arange(sq.size) + 1.0) ** 2 * sq)


@dataclass(frozen=True)
class WeightedHankelReport:
    norm: float
    b_alpha: float
    a_alpha: float
    holds: bool
    a_below_b: bool

    @property
    def bound(self) -> float:
        return math.sqrt(self.b_alpha)

    def to_record(self) -> dict:
        return {
            "norm": self.norm,
            "sqrt_b_alpha": self.bound,
            "a_alpha": self.a_alpha,
            "b_alpha": self.b_alpha,
            "holds": self.holds,
            "a_below_b_observed": self.a_below_b,
        }


def weighted_hankel_bound_check(spec: HankelSpec, cfg: ToleranceConfig = DEFAULT_TOL) -> WeightedHankelReport:
    """``||[(j+1) alpha_{i+j} C_{i+j}]|| <= B(alpha)^{1/2}`` on the window.

    ``a_below_b`` records whether ``A(alpha) <= B(alpha)`` for this input; it is
    an observation, not an asserted property.
    """
    W = weighted_hankel(spec)
    nrm = operator_norm(W, cfg) if np.any(W) else 0.0
    b = b_alpha(spec.alpha)
    a = a_alpha(spec.alpha)
    return WeightedHankelReport(nrm, b, a, nrm <= math.sqrt(b) + cfg.norm_tol, a <= b)


# --------------------------------------------------------------------------
# block operators
# --------------------------------------------------------------------------

def foguel_hankel(spec: HankelSpec) -> BlockUpper:
    """``R(G) = [[S*, G], [0, S]]`` with ``S`` the truncated shift of multiplicity ``2^m``."""
    S = _shift(spec)
    return BlockUpper(S.adjoint, hankel_gamma(spec), S)


def foguel_diagonal(pattern: Sequence[int]) -> BlockUpper:
    """``[[S*, P], [0, S]]`` with ``P`` the diagonal 0/1 projection given by ``pattern``."""
    pattern = [int(p) for p in pattern]
    if any(p not in (0, 1) for p in pattern):
        raise ValueError("pattern entries must be 0 or 1")
    S = truncated_shift(1, len(pattern))
    return BlockUpper(S.adjoint, np.diag(pattern).astype(np.complex128), S)


def first_block_projection(b: BlockUpper) -> np.ndarray:
    """Projection of ``K (+) l^2(H)`` onto block 0 of the second summand."""
    k = b.k_dim
    V = b.V
    P = np.zeros((k + b.h_dim, k + b.h_dim), dtype=np.complex128)
    P[k:, k:] = block_projection(V.block_size, V.blocks, [0])
    return P
