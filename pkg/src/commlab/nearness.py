"""Weighted quadratic nearness and the hilbertian renorming of ``R(X)``.

Two forms of the nearness constant are computed over a finite window
``n = 0..N``:

* Gram form: ``sqrt(max_N || sum_{n<=N} beta(n)^-2 D_n D_n^* ||)``
* row form: ``|| [D_0/beta(0), D_1/beta(1), ..., D_N/beta(N)] ||``

with ``D_n = T^n - C^n``.  They coincide because ``R R^* = sum D_n D_n^*/beta^2``.
Nearness modulo a subspace right-multiplies each ``D_n`` by the orthogonal
projection onto that subspace.

The renorming acts on ``K (+) l^2(H)`` truncated to ``N`` blocks.  Writing
``h_n`` for block ``n`` of ``h`` and ``c = k - sum_n X_n h_n / beta(n)``,
the infimum over decompositions of ``k`` reduces to a minimum-norm problem::

    |(k, h)|^2 = ||c||^2 + ||h||^2 + <G_M^{-1} c, c>,   G_M = sum_{n<=M} T^n T^{*n}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .linalg import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_matrix,
    gram_cholesky,
    min_norm_constrained,
    operator_norm,
)
from .operators import BetaSequence, WindowedOperator, block_projection

__all__ = [
    "NearnessReport",
    "EquivalenceCheck",
    "RenormModel",
    "RenormValue",
    "RenormEquivalence",
    "ContractionReport",
    "NotAProjection",
    "BuildRefused",
    "near_gram",
    "near_row",
    "near_modulo_equivalence_check",
    "build_renorm_model",
    "renorm_value",
    "depth_curve",
    "renorm_equivalence",
    "renorm_contraction_check",
    "parallelogram_check",
    "car_nearness_check",
]


class NotAProjection(ValueError):
    pass


class BuildRefused(ValueError):
    pass


def _mat(a) -> np.ndarray:
    return a.matrix if isinstance(a, WindowedOperator) else as_matrix(a)


def _norm(a, cfg) -> float:
    a = np.asarray(a)
    return operator_norm(a, cfg) if a.size and np.any(a) else 0.0


def _betas(beta: BetaSequence | None, N: int) -> np.ndarray:
    if beta is None:
        return np.ones(N + 1)
    b = beta.products
    if b.size < N + 1:
        raise ValueError(f"beta sequence covers n <= {b.size - 1}, need n <= {N}")
    return b[: N + 1]


def _differences(T, C, N: int) -> list[np.ndarray]:
    T, C = _mat(T), _mat(C)
    if T.shape != C.shape or T.shape[0] != T.shape[1]:
        raise ValueError(f"T{T.shape} and C{C.shape} must be square of equal size")
    out = []
    tp = np.eye(T.shape[0], dtype=np.complex128)
    cp = tp.copy()
    for _ in range(N + 1):
        out.append(tp - cp)
        tp, cp = tp @ T, cp @ C
    return out


def _check_projection(P, cfg) -> np.ndarray:
    P = as_matrix(P)
    idem = _norm(P @ P - P, cfg)
    herm = _norm(P - P.conj().T, cfg)
    if idem > cfg.identity_tol or herm > cfg.identity_tol:
        raise NotAProjection(
            f"subspace projection is not an orthogonal projection: ||P^2-P|| = {idem:.3e}, "
            f"||P-P*|| = {herm:.3e}"
        )
    return P


@dataclass(frozen=True)
class NearnessReport:
    N: int
    beta: tuple[float, ...]
    s_gram: float | None = None
    s_row: float | None = None
    per_N_gram: tuple[float, ...] = ()
    per_N_row: tuple[float, ...] = ()
    projected: bool = False

    @property
    def value(self) -> float:
        return self.s_row if self.s_row is not None else self.s_gram

    @property
    def per_N(self) -> tuple[float, ...]:
        return self.per_N_row or self.per_N_gram

    def to_record(self) -> dict:
        return {
            "N": self.N,
            "s_gram": self.s_gram,
            "s_row": self.s_row,
            "projected": self.projected,
            "per_N_gram": list(self.per_N_gram),
            "per_N_row": list(self.per_N_row),
        }


def near_gram(T, C, beta: BetaSequence | None = None, N: int = 8,
              cfg: ToleranceConfig = DEFAULT_TOL, *, projection=None) -> NearnessReport:
    """Gram form of the nearness constant with the per-``N`` curve.

    With ``projection`` the Gram sum is ``sum D_n P D_n^* / beta(n)^2``.
    """
    b = _betas(beta, N)
    diffs = _differences(T, C, N)
    P = None if projection is None else _check_projection(projection, cfg)
    acc = np.zeros_like(diffs[0])
    curve = []
    for n, d in enumerate(diffs):
        dp = d if P is None else d @ P
        acc = acc + (dp @ dp.conj().T) / b[n] ** 2
        curve.append(math.sqrt(_norm(acc, cfg)))
    return NearnessReport(N, tuple(b), s_gram=max(curve), per_N_gram=tuple(curve), projected=P is not None)


def near_row(T, C, beta: BetaSequence | None = None, N: int = 8, projection=None,
             cfg: ToleranceConfig = DEFAULT_TOL) -> NearnessReport:
    """Row-operator form ``||[ (T^n - C^n) P / beta(n) ]_{n=0..N}||``."""
    b = _betas(beta, N)
    diffs = _differences(T, C, N)
    P = None if projection is None else _check_projection(projection, cfg)
    blocks = [(d if P is None else d @ P) / b[n] for n, d in enumerate(diffs)]
    curve = [_norm(np.hstack(blocks[: n + 1]), cfg) for n in range(N + 1)]
    return NearnessReport(N, tuple(b), s_row=curve[-1], per_N_row=tuple(curve), projected=P is not None)


@dataclass(frozen=True)
class EquivalenceCheck:
    s_gram: float
    s_row: float
    s_gram_projected: float | None
    s_row_projected: float | None
    tol: float

    @property
    def agree(self) -> bool:
        ok = abs(self.s_gram - self.s_row) <= self.tol
        if self.s_row_projected is not None:
            ok = ok and abs(self.s_gram_projected - self.s_row_projected) <= self.tol
        return ok


def near_modulo_equivalence_check(T, C, beta: BetaSequence | None = None, projection=None,
                                  N: int = 8, cfg: ToleranceConfig = DEFAULT_TOL) -> EquivalenceCheck:
    """Compare Gram and row forms, unprojected and (if given) modulo ``projection``.

    The row form is the canonical value modulo a subspace; the Gram form
    with the projection inserted serves as its oracle.
    """
    g = near_gram(T, C, beta, N, cfg)
    r = near_row(T, C, beta, N, None, cfg)
    gp = rp = None
    if projection is not None:
        gp = near_gram(T, C, beta, N, cfg, projection=projection).s_gram
        rp = near_row(T, C, beta, N, projection, cfg).s_row
    scale = max(1.0, g.s_gram, r.s_row)
    return EquivalenceCheck(g.s_gram, r.s_row, gp, rp, 2 * cfg.norm_tol * scale)


# --------------------------------------------------------------------------
# renorming
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RenormModel:
    """Cached data for evaluating the renormed quadratic form.

    ``X_n`` (``n = 0..N``) are the upper-right blocks of ``R(X)^n``;
    ``X_first`` keeps their columns on block 0, the only ones the form uses.
    ``rows[m]`` is ``[I, T, ..., T^m]`` and ``factors[m]`` the Cholesky factor of
    its Gram matrix ``G_m``, for ``m`` in ``{M, M+1}``.
    """

    T: np.ndarray
    X: np.ndarray
    S: np.ndarray
    block_size: int
    blocks: int
    beta: np.ndarray
    M: int
    X_n: tuple[np.ndarray, ...]
    X_first: tuple[np.ndarray, ...]
    rows: dict = field(repr=False)
    factors: dict = field(repr=False)
    nearness_constant: float = 0.0
    recurrence_residual: float = 0.0
    t_contraction: bool = True
    s_contraction: bool = True

    @property
    def k_dim(self) -> int:
        return self.T.shape[0]

    @property
    def h_dim(self) -> int:
        return self.S.shape[0]

    def block(self, h: np.ndarray, n: int) -> np.ndarray:
        d = self.block_size
        return h[n * d:(n + 1) * d]

    def R(self) -> np.ndarray:
        k, hdim = self.k_dim, self.h_dim
        out = np.zeros((k + hdim, k + hdim), dtype=np.complex128)
        out[:k, :k], out[:k, k:], out[k:, k:] = self.T, self.X, self.S
        return out


def _row_and_factor(T: np.ndarray, m: int, cfg):
    k = T.shape[0]
    powers = [np.eye(k, dtype=np.complex128)]
    for _ in range(m):
        powers.append(powers[-1] @ T)
    row = np.hstack(powers)
    gram = sum(p @ p.conj().T for p in powers)
    return row, gram_cholesky(gram, cfg)


def build_renorm_model(T, X, S: WindowedOperator, beta: BetaSequence, M: int | None = None,
                       cfg: ToleranceConfig = DEFAULT_TOL, *, ratio_cap: float = 1e6) -> RenormModel:
    """Precompute ``X_n``, the Gram factors and the nearness constant.

    ``S`` must be a shift-type window (weighted shift); ``beta`` its weights.
    Refused when ``sup beta(n+k)/beta(n)`` over the window exceeds
    ``ratio_cap``, i.e. ``S`` is not power bounded on the window.
    """
    if not isinstance(S, WindowedOperator) or S.ambient != "shift":
        raise TypeError("S must be a shift-type WindowedOperator")
    d, N = S.block_size, S.blocks
    ratio = beta.ratio_sup()
    if ratio > ratio_cap:
        raise BuildRefused(f"shift not power bounded on the window: sup beta(n+k)/beta(n) = {ratio:.3e}")
    if M is None:
        M = S.guard
    T, X, Sm = _mat(T), as_matrix(X), S.matrix
    k = T.shape[0]
    if X.shape != (k, d * N):
        raise ValueError(f"X must be {k}x{d * N}, got {X.shape}")
    b = _betas(beta, N)

    X_n = [np.zeros_like(X)]
    s_power = np.eye(d * N, dtype=np.complex128)
    for _ in range(N):
        X_n.append(T @ X_n[-1] + X @ s_power)
        s_power = s_power @ Sm
    # direct sums as the independent check of the recurrence
    rec = 0.0
    for n in range(1, min(S.guard, N) + 1):
        direct = sum(
            np.linalg.matrix_power(T, j) @ X @ np.linalg.matrix_power(Sm, n - j - 1) for j in range(n)
        )
        rec = max(rec, float(np.max(np.abs(direct - X_n[n]))))

    X_first = tuple(xn[:, :d] for xn in X_n)
    row = np.hstack([X_first[n] / b[n] for n in range(N)])
    C = _norm(row, cfg)

    rows, factors = {}, {}
    for m in (M, M + 1):
        rows[m], factors[m] = _row_and_factor(T, m, cfg)
    tol = cfg.identity_tol
    return RenormModel(
        T, X, Sm, d, N, b, M, tuple(X_n), X_first, rows, factors, C, rec,
        _norm(T, cfg) <= 1 + tol, _norm(Sm, cfg) <= 1 + tol,
    )


@dataclass(frozen=True)
class RenormValue:
    value: float
    c: np.ndarray
    k_parts: tuple[np.ndarray, ...]
    depth: int

    @property
    def norm(self) -> float:
        return math.sqrt(max(self.value, 0.0))


def _c_vector(model: RenormModel, k, h) -> np.ndarray:
    c = np.array(k, dtype=np.complex128)
    for n in range(model.blocks):
        hn = model.block(h, n)
        if np.any(hn):
            c -= model.X_first[n] @ hn / model.beta[n]
    return c


def renorm_value(model: RenormModel, k, h, cfg: ToleranceConfig = DEFAULT_TOL, *,
                 depth: int | None = None) -> RenormValue:
    """``|(k, h)|^2`` in closed form, with the minimising ``k_0..k_M``."""
    k = np.asarray(k, dtype=np.complex128).reshape(-1)
    h = np.asarray(h, dtype=np.complex128).reshape(-1)
    if k.shape[0] != model.k_dim or h.shape[0] != model.h_dim:
        raise ValueError(f"expected k of length {model.k_dim} and h of length {model.h_dim}")
    m = model.M if depth is None else depth
    if m not in model.factors:
        model.rows[m], model.factors[m] = _row_and_factor(model.T, m, cfg)
    c = _c_vector(model, k, h)
    kappa, inner = min_norm_constrained(model.rows[m], c, cfg, gram_factor=model.factors[m])
    value = float(np.vdot(c, c).real + np.vdot(h, h).real + inner)
    parts = tuple(kappa[i * model.k_dim:(i + 1) * model.k_dim] for i in range(m + 1))
    return RenormValue(value, c, parts, m)


def depth_curve(model: RenormModel, k, h, cfg: ToleranceConfig = DEFAULT_TOL) -> list[float]:
    """``<G_m^{-1} c, c>`` for ``m = 0..M``; non-increasing in ``m``."""
    c = _c_vector(model, np.asarray(k, dtype=np.complex128), np.asarray(h, dtype=np.complex128))
    out = []
    gram = np.zeros((model.k_dim, model.k_dim), dtype=np.complex128)
    power = np.eye(model.k_dim, dtype=np.complex128)
    for _ in range(model.M + 1):
        gram = gram + power @ power.conj().T
        power = power @ model.T
        y = spla.cho_solve(gram_cholesky(gram, cfg), c)
        out.append(float(np.vdot(c, y).real))
    return out


def _samples(model: RenormModel, count: int, seed: int, interior: bool = False):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = rng.standard_normal(model.k_dim) + 1j * rng.standard_normal(model.k_dim)
        h = rng.standard_normal(model.h_dim) + 1j * rng.standard_normal(model.h_dim)
        if interior:
            h[(model.blocks - 1) * model.block_size:] = 0.0
        scale = math.sqrt(np.vdot(k, k).real + np.vdot(h, h).real)
        yield k / scale, h / scale


@dataclass(frozen=True)
class RenormEquivalence:
    c_lower: float
    c_upper: float
    envelope_lower: float
    envelope_upper: float
    nearness_constant: float

    @property
    def within(self) -> bool:
        return self.envelope_lower * (1 - 1e-12) <= self.c_lower and self.c_upper <= self.envelope_upper * (1 + 1e-12)

    def to_record(self) -> dict:
        return {
            "c_lower": self.c_lower,
            "c_upper": self.c_upper,
            "envelope_lower": self.envelope_lower,
            "envelope_upper": self.envelope_upper,
            "nearness_constant": self.nearness_constant,
            "within": self.within,
        }


def renorm_equivalence(model: RenormModel, sample_count: int = 100, seed: int = 0,
                       cfg: ToleranceConfig = DEFAULT_TOL) -> RenormEquivalence:
    """Sampled constants ``c_lower <= |(k,h)|^2 / (||k||^2 + ||h||^2) <= c_upper``.

    The analytic envelope, from the measured nearness constant ``C``, is
    ``1/max(2, 2C^2 + 1) <= ratio <= max(4, 4C^2 + 1)``.  A sample outside it
    is an implementation error and raises ``AssertionError``.
    """
    ratios = [renorm_value(model, k, h, cfg).value for k, h in _samples(model, sample_count, seed)]
    C2 = model.nearness_constant ** 2
    result = RenormEquivalence(min(ratios), max(ratios), 1.0 / max(2.0, 2 * C2 + 1), max(4.0, 4 * C2 + 1),
                               model.nearness_constant)
    if not result.within:
        raise AssertionError(f"renormed ratios [{result.c_lower}, {result.c_upper}] leave the envelope "
                             f"[{result.envelope_lower}, {result.envelope_upper}]")
    return result


@dataclass(frozen=True)
class ContractionReport:
    samples: int
    max_excess: float
    max_exact_excess: float
    decomposition_residual: float
    passed: bool
    precondition: bool = True
    witness: tuple | None = None

    def to_record(self) -> dict:
        return {
            "samples": self.samples,
            "precondition": self.precondition,
            "max_excess": self.max_excess,
            "max_exact_excess": self.max_exact_excess,
            "decomposition_residual": self.decomposition_residual,
            "passed": self.passed,
        }


def renorm_contraction_check(model: RenormModel, sample_count: int = 200, seed: int = 0,
                             cfg: ToleranceConfig = DEFAULT_TOL) -> ContractionReport:
    """``|R(X) v| <= |v|`` on interior samples (last block of ``h`` zero).

    For each sample the minimiser ``(k_n)`` of ``|v|`` is shifted to
    ``(0, k_0, k_1, ...)`` and ``h_n`` to ``beta(n+1)/beta(n) h_n`` in slot
    ``n+1``.  This is checked to decompose ``R(X) v`` and its cost
    ``||T c||^2 + ||S h||^2 + sum ||k_n||^2`` bounds ``|R(X) v|^2`` from above.
    The closed form at depth ``M+1`` (where the shifted decomposition is
    admissible) is compared with ``|v|^2`` as well.  The bound needs ``T`` and
    ``S`` to be contractions; ``precondition`` records whether they are.
    """
    T, X, S = model.T, model.X, model.S
    b = model.beta
    N = model.blocks
    max_excess = max_exact = -math.inf
    decomp = 0.0
    witness = None
    for k, h in _samples(model, sample_count, seed, interior=True):
        v = renorm_value(model, k, h, cfg)
        Sh = S @ h
        first = T @ k + X @ h
        # shifted decomposition of R(X) v
        moved = sum(np.linalg.matrix_power(T, n + 1) @ kn for n, kn in enumerate(v.k_parts))
        via_x = np.zeros_like(first)
        for n in range(N - 1):
            hn = model.block(h, n)
            h_next = (b[n + 1] / b[n]) * hn
            decomp = max(decomp, float(np.linalg.norm(model.block(Sh, n + 1) - h_next)))
            via_x += model.X_first[n + 1] @ h_next / b[n + 1]
        decomp = max(decomp, float(np.linalg.norm(model.block(Sh, 0))),
                     float(np.linalg.norm(moved + via_x - first)))
        upper = float(np.vdot(moved, moved).real + np.vdot(Sh, Sh).real
                      + sum(np.vdot(kn, kn).real for kn in v.k_parts))
        exact = renorm_value(model, first, Sh, cfg, depth=model.M + 1).value
        excess, exact_excess = upper - v.value, exact - v.value
        if excess > max_excess:
            max_excess = excess
        if exact_excess > max_exact:
            max_exact = exact_excess
        if max(excess, exact_excess) > cfg.identity_tol and witness is None:
            witness = (k, h)
    passed = max(max_excess, max_exact) <= cfg.identity_tol and decomp <= cfg.identity_tol
    return ContractionReport(sample_count, max_excess, max_exact, decomp, passed,
                             model.t_contraction and model.s_contraction, witness)


def parallelogram_check(model: RenormModel, sample_count: int = 50, seed: int = 0,
                        cfg: ToleranceConfig = DEFAULT_TOL) -> float:
    """Max ``| |v+w|^2 + |v-w|^2 - 2|v|^2 - 2|w|^2 |`` over unit-norm sample pairs."""
    samples = list(_samples(model, 2 * sample_count, seed))
    worst = 0.0
    for (k1, h1), (k2, h2) in zip(samples[::2], samples[1::2]):
        q = lambda k, h: renorm_value(model, k, h, cfg).value
        r = q(k1 + k2, h1 + h2) + q(k1 - k2, h1 - h2) - 2 * q(k1, h1) - 2 * q(k2, h2)
        worst = max(worst, abs(r))
    return worst


# --------------------------------------------------------------------------
# CAR-valued Foguel-Hankel nearness
# --------------------------------------------------------------------------

def car_nearness_check(spec, cfg: ToleranceConfig = DEFAULT_TOL, N: int | None = None) -> dict:
    """Nearness of ``R(G)`` to ``S* (+) S`` modulo the first block, against ``B(alpha)^{1/2}``."""
    from .car import b_alpha, first_block_projection, foguel_hankel
    from .operators import assemble_R, direct_sum

    b = foguel_hankel(spec)
    R = assemble_R(b).matrix
    R0 = direct_sum(b.T, b.V).matrix
    N = spec.blocks if N is None else N
    rep = near_row(R, R0, None, N, first_block_projection(b), cfg)
    bound = math.sqrt(b_alpha(spec.alpha))
    return {"nearness": rep.s_row, "sqrt_b_alpha": bound, "per_N": list(rep.per_N_row),
            "holds": rep.s_row <= bound + 1e-8}
