"""The commutator equation ``X = T Z - Z V`` and similarity certificates.

``R(X) = [[T, X], [0, V]]`` satisfies::

    [[I, Z], [0, I]] R(X) [[I, -Z], [0, I]] = T (+) V    when X = T Z - Z V

so any solution ``Z`` is an explicit similarity between ``R(X)`` and the
block diagonal ``R(0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    SingularMatrixError,
    ToleranceConfig,
    as_matrix,
    kron,
    lu_solve,
    operator_norm,
    unvec,
    vec,
)
from .operators import BlockUpper, WindowedOperator, assemble_R, classify_growth, direct_sum, finite

__all__ = [
    "SylvesterSolution",
    "GrowthReport",
    "Certificate",
    "Decomposition",
    "GrowthDetected",
    "NotASolution",
    "CertificateRefused",
    "commutator",
    "default_n_max",
    "solve_sylvester_direct",
    "partial_sum_solution",
    "growth_condition",
    "decompose_coisometry_case",
    "decompose_isometry_case",
    "decompose_weighted_case",
    "solution_from_decomposition",
    "certify_similarity",
]


def _mat(a) -> np.ndarray:
    return a.matrix if isinstance(a, WindowedOperator) else as_matrix(a)


def _norm(a, cfg) -> float:
    a = np.asarray(a)
    return operator_norm(a, cfg) if a.size and np.any(a) else 0.0


def commutator(T, V, Z) -> np.ndarray:
    """``T Z - Z V``."""
    T, V, Z = _mat(T), _mat(V), as_matrix(Z)
    return T @ Z - Z @ V


class GrowthDetected(ArithmeticError):
    """Partial sums do not stay bounded on the window; no solution is formed."""

    def __init__(self, norms, growth: str, slope: float):
        super().__init__(f"partial sums diverge ({growth}, log-log slope {slope:.3f})")
        self.norms = tuple(norms)
        self.growth = growth
        self.slope = slope


class NotASolution(ValueError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"Z does not solve X = TZ - ZV: residual {residual:.3e} above {tol:.3e}")
        self.residual = residual


class CertificateRefused(ValueError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"conjugation residual {residual:.3e} above {tol:.3e}; certificate refused")
        self.residual = residual


@dataclass(frozen=True)
class SylvesterSolution:
    Z: np.ndarray
    residual: float
    method: str
    side_condition_residual: float | None = None
    solvable: bool = True
    verdict: str = "unique"
    condition: float | None = None
    partial_norms: tuple[float, ...] = ()
    window_residual: float | None = None

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "residual": self.residual,
            "side_condition_residual": self.side_condition_residual,
            "solvable": self.solvable,
            "verdict": self.verdict,
            "condition": self.condition,
            "window_residual": self.window_residual,
        }


# --------------------------------------------------------------------------
# direct solve
# --------------------------------------------------------------------------

def solve_sylvester_direct(T, V, X, cfg: ToleranceConfig = DEFAULT_TOL) -> SylvesterSolution:
    """Solve ``T Z - Z V = X`` through the vectorised Kronecker system.

    A condition estimate above ``1/cfg.solve_tol`` is read as overlapping
    spectra: the least-squares solution is returned with ``solvable`` set by
    whether its residual is within tolerance.
    """
    T, V, X = _mat(T), _mat(V), as_matrix(X)
    k, h = T.shape[0], V.shape[0]
    if T.shape != (k, k) or V.shape != (h, h) or X.shape != (k, h):
        raise ValueError(f"incompatible shapes T{T.shape}, V{V.shape}, X{X.shape}")
    K = kron(np.eye(h), T, cfg) - kron(V.T, np.eye(k), cfg)
    rhs = vec(X)
    scale = max(_norm(T, cfg), _norm(V, cfg), 1.0)
    try:
        z, cond = lu_solve(K, rhs, cfg)
        singular = cond * cfg.solve_tol > 1
    except SingularMatrixError:
        z, cond, singular = None, math.inf, True
    if singular:
        z = np.linalg.lstsq(K, rhs, rcond=None)[0]
    Z = unvec(z, k, h)
    residual = _norm(commutator(T, V, Z) - X, cfg)
    if not singular:
        return SylvesterSolution(Z, residual, "kronecker", condition=cond)
    consistent = residual <= cfg.solve_tol * max(scale * _norm(Z, cfg), _norm(X, cfg), 1.0)
    verdict = "spectra overlap: consistent" if consistent else "spectra overlap: no solution"
    return SylvesterSolution(Z, residual, "kronecker", solvable=consistent, verdict=verdict, condition=cond)


# --------------------------------------------------------------------------
# partial sums
# --------------------------------------------------------------------------

def _partial_sum_terms(T, V, X, n_max: int, side: str):
    """Yield the running partial sums ``S_0, S_1, ..., S_{n_max}``."""
    Vs = V.conj().T
    s = np.zeros_like(X)
    if side == "right":
        # S_n = sum_j T^j X V*^{j+1}
        left, right = np.eye(T.shape[0], dtype=complex), Vs.copy()
        for _ in range(n_max + 1):
            s = s + left @ X @ right
            yield s
            left, right = left @ T, right @ Vs
    elif side == "left":
        # S_n = sum_j T*^{j+1} X V^j
        Ts = T.conj().T
        left, right = Ts.copy(), np.eye(V.shape[0], dtype=complex)
        for _ in range(n_max + 1):
            s = s + left @ X @ right
            yield s
            left, right = left @ Ts, right @ V
    elif side == "symmetric":
        # S_n = sum_j (V^{j+1} X V^j - V*^j X V*^{j+1})
        vp = np.eye(V.shape[0], dtype=complex)  # V^j
        vsp = np.eye(V.shape[0], dtype=complex)  # V*^j
        for _ in range(n_max + 1):
            s = s + (V @ vp) @ X @ vp - vsp @ X @ (vsp @ Vs)
            yield s
            vp, vsp = vp @ V, vsp @ Vs
    else:
        raise ValueError(f"unknown side {side!r}")


def _side_residual(T, V, Z, side: str, cfg) -> float:
    if side == "left":
        return _norm((np.eye(T.shape[0]) - T.conj().T @ T) @ Z, cfg)
    return _norm(Z @ (np.eye(V.shape[0]) - V @ V.conj().T), cfg)


def partial_sum_solution(T, V, X, n_max: int | None = None,
                         mode: Literal["plain", "cesaro"] = "plain",
                         side: Literal["right", "left", "symmetric"] = "right",
                         cfg: ToleranceConfig = DEFAULT_TOL) -> SylvesterSolution:
    """Constructive solution of the commutator equation from partial sums.

    ``side="right"``: ``Z_n = -sum_{j<=n} T^j X V*^{j+1}`` (``V`` an isometry,
    ``T`` power bounded); the side condition ``Z (I - VV*) = 0`` is reported.

    ``side="left"``: ``Z_n = sum_{j<=n} T*^{j+1} X V^j`` (``T`` a coisometry,
    ``V`` power bounded); side condition ``(I - T*T) Z = 0``.

    ``side="symmetric"``: solves ``X = V* Z - Z V`` for a single ``V`` with
    ``Z_n = 1/2 sum_{j<=n} (V^{j+1} X V^j - V*^j X V*^{j+1})``; ``T`` must be
    ``V*``.

    ``mode="cesaro"`` returns the average of ``Z_0..Z_{n_max}``, the
    constructive stand-in for a Banach limit; it agrees with the plain limit
    whenever that exists.  Raises :class:`GrowthDetected` when the partial
    sums are not bounded on the window.
    """
    if n_max is None:
        n_max = default_n_max(T, V)
    if mode not in ("plain", "cesaro"):
        raise ValueError(f"unknown mode {mode!r}")
    if side not in ("right", "left", "symmetric"):
        raise ValueError(f"unknown side {side!r}")
    P_k = _window(T)
    P_h = _window(V)
    T, V, X = _mat(T), _mat(V), as_matrix(X)
    if side == "symmetric" and not np.allclose(T, V.conj().T, atol=cfg.identity_tol):
        raise ValueError("symmetric side solves X = V* Z - Z V; pass T = V*")
    sign = {"right": -1.0, "left": 1.0, "symmetric": 0.5}[side]
    norms, acc, last = [], np.zeros_like(X), None
    for s in _partial_sum_terms(T, V, X, n_max, side):
        z = sign * s
        norms.append(_norm(z, cfg))
        acc = acc + z
        last = z
    growth, slope, _ = classify_growth(norms)
    if growth != "bounded":
        raise GrowthDetected(norms, growth, slope)
    Z = acc / len(norms) if mode == "cesaro" else last
    residual = _norm(commutator(T, V, Z) - X, cfg)
    side_res = None if side == "symmetric" else _side_residual(T, V, Z, side, cfg)
    window_res = None
    if P_k is not None or P_h is not None:
        P_k = np.eye(T.shape[0]) if P_k is None else P_k
        P_h = np.eye(V.shape[0]) if P_h is None else P_h
        window_res = _norm(P_k @ (commutator(T, V, Z) - X) @ P_h, cfg)
    return SylvesterSolution(Z, residual, "cesaro" if mode == "cesaro" else "partial_sum",
                             side_condition_residual=side_res, partial_norms=tuple(norms),
                             window_residual=window_res)


def _window(op):
    """Guard-window projection of a shift-type operator, else ``None``."""
    if isinstance(op, WindowedOperator) and op.ambient == "shift":
        return op.window_projection()
    return None


def default_n_max(*ops, fallback: int = 64) -> int:
    """``guard - 2`` for the tightest shift-type window among ``ops``."""
    guards = [op.guard for op in ops if isinstance(op, WindowedOperator) and op.ambient == "shift"]
    return max(1, min(guards) - 2) if guards else fallback


@dataclass(frozen=True)
class GrowthReport:
    side: str
    partial_norms: tuple[float, ...]
    sup_value: float
    verdict: str
    slope: float
    partial_sum_verdict: str | None = None
    equivalence_consistent: bool | None = None

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def to_record(self) -> dict:
        return {
            "side": self.side,
            "sup_value": self.sup_value,
            "verdict": self.verdict,
            "slope": self.slope,
            "partial_sum_verdict": self.partial_sum_verdict,
            "equivalence_consistent": self.equivalence_consistent,
            "partial_norms": list(self.partial_norms),
        }


def growth_condition(T, V, X, n_max: int | None = None,
                     side: Literal["right", "left", "symmetric"] = "right",
                     cfg: ToleranceConfig = DEFAULT_TOL) -> GrowthReport:
    """Partial-sum norms of the growth conditions and a bounded/unbounded verdict.

    ``right``: ``||sum_{j<=n} T^j X V*^{j+1}||``; ``left``:
    ``||sum_{j<=n} T*^{j+1} X V^j||``; ``symmetric``:
    ``||sum_{j<=n} (V^{j+1} X V^j - V*^j X V*^{j+1})||`` with ``T = V*``.
    For ``right`` the partial-sum construction is attempted too and the two
    verdicts are compared.
    """
    if n_max is None:
        n_max = default_n_max(T, V)
    T, V, X = _mat(T), _mat(V), as_matrix(X)
    norms = [_norm(s, cfg) for s in _partial_sum_terms(T, V, X, n_max, side)]
    growth, slope, _ = classify_growth(norms)
    verdict = "bounded" if growth == "bounded" else f"unbounded ({growth})"
    ps_verdict = consistent = None
    if side == "right":
        try:
            partial_sum_solution(T, V, X, n_max, "plain", "right", cfg)
            ps_verdict = "converges"
        except GrowthDetected:
            ps_verdict = "diverges"
        consistent = (ps_verdict == "converges") == (verdict == "bounded")
    return GrowthReport(side, tuple(norms), max(norms), verdict, slope, ps_verdict, consistent)


# --------------------------------------------------------------------------
# decompositions X = A + F
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    """``X = A + F`` with ``A = T D - D V`` and the product identity on ``F``.

    ``checks`` maps identity names to residual norms.
    """

    A: np.ndarray
    F: np.ndarray
    D: np.ndarray
    checks: dict[str, float] = field(default_factory=dict)
    E_block: np.ndarray | None = None

    @property
    def max_residual(self) -> float:
        return max(self.checks.values()) if self.checks else 0.0

    def to_record(self) -> dict:
        return {"checks": dict(self.checks), "max_residual": self.max_residual}


def _require_solution(T, V, X, Z, cfg) -> None:
    res = _norm(commutator(T, V, Z) - X, cfg)
    scale = max(_norm(X, cfg), _norm(Z, cfg), 1.0)
    tol = cfg.solve_tol * scale * max(_norm(T, cfg) + _norm(V, cfg), 1.0)
    if res > tol:
        raise NotASolution(res, tol)


def decompose_coisometry_case(T, V, X, Z, cfg: ToleranceConfig = DEFAULT_TOL) -> Decomposition:
    """``F = -(I - T*T) Z V``, ``A = X - F``; ``TF = 0`` and ``D = T*T Z``.

    Here the nilpotent ``E = [[0, F], [0, 0]]`` annihilates from the other
    side: ``R(A) E = 0`` (from ``TF = 0``) while ``E R(A)`` is ``[[0, FV], [0, 0]]``.
    """
    T, V, X, Z = _mat(T), _mat(V), as_matrix(X), as_matrix(Z)
    _require_solution(T, V, X, Z, cfg)
    Q = np.eye(T.shape[0]) - T.conj().T @ T
    F = -Q @ Z @ V
    A = X - F
    D = T.conj().T @ T @ Z
    checks = {
        "X = A + F": _norm(X - (A + F), cfg),
        "TF = 0": _norm(T @ F, cfg),
        "A = TD - DV": _norm(A - commutator(T, V, D), cfg),
        "(I - T*T)D = 0": _norm(Q @ D, cfg),
    }
    return Decomposition(A, F, D, checks, _nilpotent_block(T, V, A, F, checks, cfg, left=True))


def decompose_isometry_case(T, V, X, Z, cfg: ToleranceConfig = DEFAULT_TOL) -> Decomposition:
    """``F = T Z (I - VV*)``, ``A = X - F``; ``FV = 0`` and ``D = Z V V*``."""
    T, V, X, Z = _mat(T), _mat(V), as_matrix(X), as_matrix(Z)
    _require_solution(T, V, X, Z, cfg)
    VVs = V @ V.conj().T
    F = T @ Z @ (np.eye(V.shape[0]) - VVs)
    A = X - F
    D = Z @ VVs
    checks = {
        "X = A + F": _norm(X - (A + F), cfg),
        "FV = 0": _norm(F @ V, cfg),
        "A = TD - DV": _norm(A - commutator(T, V, D), cfg),
    }
    return Decomposition(A, F, D, checks, _nilpotent_block(T, V, A, F, checks, cfg))


def decompose_weighted_case(T, S, X, Z, L, cfg: ToleranceConfig = DEFAULT_TOL) -> Decomposition:
    """``F = T Z (I - S L)`` with ``L`` a left inverse of the weighted shift ``S``.

    ``A = X - F = T D - D S`` with ``D = Z S L``; ``F S = 0``.  The nilpotent
    ``E = [[0, F], [0, 0]]`` satisfies ``E^2 = 0`` and ``E R(A) = 0``.
    """
    T, S, X, Z, L = _mat(T), _mat(S), as_matrix(X), as_matrix(Z), _mat(L)
    _require_solution(T, S, X, Z, cfg)
    SL = S @ L
    F = T @ Z @ (np.eye(S.shape[0]) - SL)
    A = X - F
    D = Z @ SL
    checks = {
        "X = A + F": _norm(X - (A + F), cfg),
        "FS = 0": _norm(F @ S, cfg),
        "A = TD - DS": _norm(A - commutator(T, S, D), cfg),
    }
    return Decomposition(A, F, D, checks, _nilpotent_block(T, S, A, F, checks, cfg))


def _nilpotent_block(T, V, A, F, checks, cfg, left: bool = False) -> np.ndarray:
    k, h = T.shape[0], V.shape[0]
    E = np.zeros((k + h, k + h), dtype=np.complex128)
    E[:k, k:] = F
    RA = np.zeros_like(E)
    RA[:k, :k], RA[:k, k:], RA[k:, k:] = T, A, V
    checks["E^2 = 0"] = _norm(E @ E, cfg)
    if left:
        checks["R(A) E = 0"] = _norm(RA @ E, cfg)
    else:
        checks["E R(A) = 0"] = _norm(E @ RA, cfg)
    return E


def solution_from_decomposition(T, V, A, F, D, L, cfg: ToleranceConfig = DEFAULT_TOL) -> SylvesterSolution:
    """Rebuild a solution ``Z = D - F L`` from ``X = A + F``.

    Needs ``A = T D - D V``, ``T F = 0`` and a left inverse ``L`` of ``V``.
    """
    T, V, A, F, D, L = (_mat(m) for m in (T, V, A, F, D, L))
    Z = D - F @ L
    residual = _norm(commutator(T, V, Z) - (A + F), cfg)
    return SylvesterSolution(Z, residual, "decomposition")


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    conjugation_residual: float
    diagonal_norm: float
    condition_number: float
    L: np.ndarray
    L_inv: np.ndarray

    @property
    def contraction(self) -> bool:
        return self.diagonal_norm <= 1 + 1e-12

    def to_record(self) -> dict:
        return {
            "conjugation_residual": self.conjugation_residual,
            "diagonal_norm": self.diagonal_norm,
            "condition_number": self.condition_number,
        }


def certify_similarity(b: BlockUpper, Z, cfg: ToleranceConfig = DEFAULT_TOL) -> Certificate:
    """Explicit similarity ``L R(X) L^{-1} = T (+) V`` with ``L = [[I, Z], [0, I]]``.

    ``L^{-1} = [[I, -Z], [0, I]]`` in closed form.  Refused when the
    conjugation residual exceeds ``identity_tol * max(1, ||R||) * max(1, ||Z||)``.

    Both ``L`` and ``L^{-1}`` have norm ``(z + sqrt(z^2 + 4)) / 2`` with
    ``z = ||Z||`` (their singular values pair up as ``s`` and ``1/s``), so the
    condition number is the square of that.
    """
    Z = as_matrix(Z)
    k, h = b.k_dim, b.h_dim
    if Z.shape != (k, h):
        raise ValueError(f"Z must be {k}x{h}, got {Z.shape}")
    R = assemble_R(b).matrix
    L = np.eye(k + h, dtype=np.complex128)
    L[:k, k:] = Z
    L_inv = np.eye(k + h, dtype=np.complex128)
    L_inv[:k, k:] = -Z
    diag = direct_sum(b.T, b.V).matrix
    residual = _norm(L @ R @ L_inv - diag, cfg)
    tol = cfg.identity_tol * max(1.0, _norm(R, cfg)) * max(1.0, _norm(Z, cfg))
    if residual > tol:
        raise CertificateRefused(residual, tol)
    z = _norm(Z, cfg)
    cond = ((z + math.sqrt(z * z + 4.0)) / 2.0) ** 2
    return Certificate(residual, operator_norm(diag, cfg), cond, L, L_inv)
