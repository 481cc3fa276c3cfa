"""Zero-product perturbations ``T = C + E`` with ``E C = 0``.

Holds the computable skeleton behind the stability of similarity under
such perturbations: the power expansion
``(C+E)^n = sum_k C^{n-k} E^k``, the matrix-polynomial expansion
``P(C+E) = sum_n P_(n)(C) E^n`` built from the divided shifts
``P_(n)(z) = (P_(n-1)(z) - P_(n-1)(0)) / z``, the Dirichlet-kernel control of
``||P_(n)||_inf``, and the weighted summability of ``||E^n||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import DEFAULT_TOL, ToleranceConfig, as_matrix, operator_norm, spectral_radius

__all__ = [
    "MatrixPolynomial",
    "ZeroProductReport",
    "SumIdentityReport",
    "RotaReport",
    "CircleNorm",
    "ShiftBoundReport",
    "GalleryInstance",
    "zero_product_check",
    "power_expansion_residual",
    "shift_poly",
    "eval_poly_at_operator",
    "verify_sum_identity",
    "rota_summability",
    "dirichlet_l1",
    "sup_circle_norm",
    "shift_bound_check",
    "measured_log_constant",
    "gallery",
    "GALLERY_NAMES",
]


def _norm(a, cfg) -> float:
    a = np.asarray(a)
    return operator_norm(a, cfg) if a.size and np.any(a) else 0.0


# --------------------------------------------------------------------------
# matrix polynomials
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixPolynomial:
    """``P(z) = sum_j A_j z^j`` with ``p x p`` coefficients.

    ``coeffs`` has shape ``(d+1, p, p)``; the stored degree ``d`` is a bound,
    trailing coefficients may vanish.  ``d = -1`` is the zero polynomial.
    """

    coeffs: np.ndarray
    size: int = 0

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == 1:
            c = c.reshape(-1, 1, 1)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"coefficients must have shape (d+1, p, p), got {c.shape}")
        size = c.shape[1] if c.shape[0] else self.size
        if size < 1:
            raise ValueError("zero polynomial needs an explicit coefficient size")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "size", size)

    @classmethod
    def zero(cls, p: int) -> "MatrixPolynomial":
        return cls(np.zeros((0, p, p), dtype=np.complex128), size=p)

    @classmethod
    def scalar(cls, coefficients) -> "MatrixPolynomial":
        return cls(np.asarray(coefficients, dtype=np.complex128).reshape(-1, 1, 1))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, z: complex) -> np.ndarray:
        """Value at a scalar point, by Horner's rule."""
        out = np.zeros((self.size, self.size), dtype=np.complex128)
        for a in self.coeffs[::-1]:
            out = out * z + a
        return out

    def on_grid(self, z: np.ndarray) -> np.ndarray:
        """Values at many points, shape ``(len(z), p, p)``."""
        z = np.asarray(z, dtype=np.complex128)
        if self.degree < 0:
            return np.zeros((z.size, self.size, self.size), dtype=np.complex128)
        powers = z[:, None] ** np.arange(self.degree + 1)[None, :]
        return np.einsum("gj,jab->gab", powers, self.coeffs)


def shift_poly(P: MatrixPolynomial, n: int = 1) -> MatrixPolynomial:
    """``P_(n)``: drop the constant term and divide by ``z``, ``n`` times."""
    if n < 0:
        raise ValueError("shift count must be nonnegative")
    if n > P.degree:
        return MatrixPolynomial.zero(P.size)
    return MatrixPolynomial(P.coeffs[n:].copy())


def eval_poly_at_operator(P: MatrixPolynomial, T) -> np.ndarray:
    """``P(T) = sum_j A_j (x) T^j`` on ``p`` copies of the space.

    Block ``(a, b)`` of the result (each ``m x m``) is ``sum_j (A_j)_{ab} T^j``.
    """
    T = as_matrix(T)
    m = T.shape[0]
    out = np.zeros((P.size * m, P.size * m), dtype=np.complex128)
    power = np.eye(m, dtype=np.complex128)
    for a in P.coeffs:
        out += np.kron(a, power)
        power = power @ T
    return out


# --------------------------------------------------------------------------
# zero-product checks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroProductReport:
    ec_norm: float
    nilpotency_order: int | None
    spectral_radius: float
    zero_product: bool

    def to_record(self) -> dict:
        return {
            "ec_norm": self.ec_norm,
            "nilpotency_order": self.nilpotency_order,
            "spectral_radius": self.spectral_radius,
            "zero_product": self.zero_product,
        }


def _nilpotency_order(E: np.ndarray, cfg: ToleranceConfig) -> int | None:
    tol = cfg.identity_tol * max(1.0, _norm(E, cfg))
    power = np.eye(E.shape[0], dtype=np.complex128)
    for k in range(1, E.shape[0] + 1):
        power = power @ E
        if _norm(power, cfg) <= tol:
            return k
    return None


def zero_product_check(E, C, cfg: ToleranceConfig = DEFAULT_TOL) -> ZeroProductReport:
    """``||EC||``, nilpotency order of ``E`` (``None`` if not nilpotent) and ``r(E)``."""
    E, C = as_matrix(E), as_matrix(C)
    if E.shape != C.shape or E.shape[0] != E.shape[1]:
        raise ValueError(f"E{E.shape} and C{C.shape} must be square of equal size")
    ec = _norm(E @ C, cfg)
    tol = cfg.identity_tol * max(1.0, _norm(E, cfg) * _norm(C, cfg))
    return ZeroProductReport(ec, _nilpotency_order(E, cfg), spectral_radius(E, cfg), ec <= tol)


def power_expansion_residual(C, E, n: int, cfg: ToleranceConfig = DEFAULT_TOL) -> float:
    """``||(C+E)^n - sum_{k=0}^n C^{n-k} E^k||``; vanishes when ``EC = 0``."""
    C, E = as_matrix(C), as_matrix(E)
    lhs = np.linalg.matrix_power(C + E, n)
    rhs = sum(np.linalg.matrix_power(C, n - k) @ np.linalg.matrix_power(E, k) for k in range(n + 1))
    return _norm(lhs - rhs, cfg)


@dataclass(frozen=True)
class SumIdentityReport:
    residual: float
    ec_norm: float
    precondition: bool

    def to_record(self) -> dict:
        return {"residual": self.residual, "ec_norm": self.ec_norm, "precondition": self.precondition}


def verify_sum_identity(P: MatrixPolynomial, C, E, cfg: ToleranceConfig = DEFAULT_TOL) -> SumIdentityReport:
    """Residual of ``P(C+E) = sum_{n=0}^{d} P_(n)(C) E^n``.

    ``E^n`` acts on each of the ``p`` copies.  The sum runs to the stored
    degree ``d``; its last term ``A_d E^d`` only drops out when ``E^d = 0``.
    When ``EC != 0`` the residual is still computed and ``precondition`` is
    ``False``.
    """
    C, E = as_matrix(C), as_matrix(E)
    ec = _norm(E @ C, cfg)
    pre = ec <= cfg.identity_tol * max(1.0, _norm(E, cfg) * _norm(C, cfg))
    lhs = eval_poly_at_operator(P, C + E)
    rhs = np.zeros_like(lhs)
    eye_p = np.eye(P.size)
    e_power = np.eye(C.shape[0], dtype=np.complex128)
    for n in range(P.degree + 1):
        rhs += eval_poly_at_operator(shift_poly(P, n), C) @ np.kron(eye_p, e_power)
        e_power = e_power @ E
    return SumIdentityReport(_norm(lhs - rhs, cfg), ec, pre)


# --------------------------------------------------------------------------
# summability of log(n+2) ||E^n||
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RotaReport:
    partial_sum: float
    tail_bound: float | None
    verdict: str
    radius: float
    norms: tuple[float, ...] = ()

    def to_record(self) -> dict:
        return {
            "partial_sum": self.partial_sum,
            "tail_bound": self.tail_bound,
            "verdict": self.verdict,
            "radius": self.radius,
        }


def rota_summability(E, n_max: int = 64, cfg: ToleranceConfig = DEFAULT_TOL, *,
                     margin: float = 1e-8) -> RotaReport:
    """Partial sum of ``sum_n log(n+2) ||E^n||`` with a rigorous tail bound.

    The series converges iff ``r(E) < 1``.  For the tail, the first ``k`` with
    ``q = ||E^k|| < 1`` is located; submultiplicativity gives
    ``||E^{n_max+i+jk}|| <= ||E^{n_max+i}|| q^j`` and
    ``log(c + jk) <= log c + jk/c`` closes the sum.
    """
    E = as_matrix(E)
    if E.shape[0] != E.shape[1]:
        raise ValueError("E must be square")
    radius = spectral_radius(E, cfg)
    norms = []
    power = np.eye(E.shape[0], dtype=np.complex128)
    for _ in range(n_max + 1):
        norms.append(_norm(power, cfg))
        power = power @ E
    partial = math.fsum(math.log(n + 2) * v for n, v in enumerate(norms))
    if not radius < 1 - margin:
        return RotaReport(partial, None, "divergent", radius, tuple(norms))
    if norms[-1] == 0.0:
        return RotaReport(partial, 0.0, "finite", radius, tuple(norms))

    # smallest k with ||E^k|| < 1, searched past the window if needed
    k, q = None, None
    probe = E.copy()
    for j in range(1, 8 * (n_max + 1) + 1):
        value = _norm(probe, cfg)
        if value < 1.0:
            k, q = j, value
            break
        probe = probe @ E
    if k is None:
        return RotaReport(partial, math.inf, "finite", radius, tuple(norms))
    tail = 0.0
    tail_power = np.linalg.matrix_power(E, n_max)
    for i in range(1, k + 1):
        tail_power = tail_power @ E
        a_i = _norm(tail_power, cfg)
        c = n_max + i + 2
        tail += a_i * (math.log(c) / (1 - q) + (k / c) * q / (1 - q) ** 2)
    return RotaReport(partial, tail, "finite", radius, tuple(norms))


# --------------------------------------------------------------------------
# Dirichlet kernel
# --------------------------------------------------------------------------

def _dirichlet(n: int) -> Callable[[float], float]:
    def f(t: float) -> float:
        s = math.sin(0.5 * t)
        if abs(s) < 1e-300:
            return 2.0 * n + 1.0
        return math.sin((n + 0.5) * t) / s
    return f


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 50) -> float:
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15 * tol:
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1))
            stack.append((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))
    return total


def dirichlet_l1(n: int, tol: float = 1e-9) -> float:
    """``(1/2pi) int_0^{2pi} |D_n(t)| dt`` for ``D_n(t) = sum_{|j|<=n} e^{ijt}``.

    Adaptive Simpson on each interval between consecutive zeros
    ``2 pi k / (2n+1)``, where the integrand has a fixed sign; ``D_n`` is
    even about ``pi`` so only ``[0, pi]`` is integrated.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1.0
    f = _dirichlet(n)
    nodes = [2 * math.pi * k / (2 * n + 1) for k in range(n + 1)] + [math.pi]
    piece_tol = 0.5 * math.pi * tol / (n + 1)
    total = math.fsum(abs(_adaptive_simpson(f, a, b, piece_tol)) for a, b in zip(nodes[:-1], nodes[1:]))
    return total / math.pi


# --------------------------------------------------------------------------
# sup norms on the unit circle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleNorm:
    value: float
    refined: float
    grid_size: int

    @property
    def refinement_gap(self) -> float:
        return abs(self.refined - self.value)


def _grid_sup(P: MatrixPolynomial, grid_size: int, cfg) -> float:
    z = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
    values = P.on_grid(z)
    if P.size == 1:
        return float(np.max(np.abs(values[:, 0, 0]))) if values.size else 0.0
    return max(_norm(v, cfg) for v in values)


def sup_circle_norm(P: MatrixPolynomial, grid_size: int | None = None,
                    cfg: ToleranceConfig = DEFAULT_TOL) -> CircleNorm:
    """``max_{|z|=1} ||P(z)||`` on a uniform grid, plus the doubled-grid value."""
    need = 4 * (max(P.degree, 0) + 1)
    if grid_size is None:
        grid_size = max(need, 64)
    if grid_size < need:
        raise ValueError(f"grid_size must be at least 4(d+1) = {need}")
    return CircleNorm(_grid_sup(P, grid_size, cfg), _grid_sup(P, 2 * grid_size, cfg), grid_size)


@dataclass(frozen=True)
class ShiftBoundReport:
    n: int
    identity_residual: float
    shifted_sup: float
    sup: float
    dirichlet: float
    bound: float
    holds: bool

    @property
    def ratio(self) -> float:
        return self.shifted_sup / self.sup if self.sup else 0.0

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "identity_residual": self.identity_residual,
            "shifted_sup": self.shifted_sup,
            "sup": self.sup,
            "dirichlet_l1": self.dirichlet,
            "bound": self.bound,
            "ratio": self.ratio,
            "holds": self.holds,
        }


def shift_bound_check(P: MatrixPolynomial, n: int, grid_size: int | None = None,
                      cfg: ToleranceConfig = DEFAULT_TOL) -> ShiftBoundReport:
    """Check ``z^n P_(n)(z) = P(z) - (D_{n-1} * P)(z)`` and the resulting bound.

    The convolution is the Fourier truncation of the grid samples of ``P`` to
    frequencies ``|j| <= n-1``.  The bound checked is
    ``||P_(n)||_inf <= (1 + ||D_{n-1}||_1) ||P||_inf``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    d = max(P.degree, 0)
    G = grid_size or max(4 * (d + 1), 64)
    z = np.exp(2j * np.pi * np.arange(G) / G)
    samples = P.on_grid(z)
    coeffs = np.fft.fft(samples, axis=0) / G
    freq = np.fft.fftfreq(G, d=1.0 / G)
    keep = (np.abs(freq) <= n - 1)[:, None, None]
    conv = np.fft.ifft(np.where(keep, coeffs, 0.0), axis=0) * G
    shifted = shift_poly(P, n)
    lhs = (z ** n)[:, None, None] * shifted.on_grid(z)
    residual = float(np.max(np.linalg.norm(lhs - (samples - conv), axis=(1, 2))))
    shifted_sup = _grid_sup(shifted, G, cfg)
    sup = _grid_sup(P, G, cfg)
    dl = dirichlet_l1(n - 1)
    bound = (1.0 + dl) * sup
    return ShiftBoundReport(n, residual, shifted_sup, sup, dl, bound, shifted_sup <= bound * (1 + 1e-12))


def measured_log_constant(P: MatrixPolynomial, grid_size: int | None = None,
                          cfg: ToleranceConfig = DEFAULT_TOL) -> float:
    """Smallest ``A`` with ``||P_(n)||_inf <= A log(n+2) ||P||_inf`` for all ``n``."""
    d = max(P.degree, 0)
    G = grid_size or max(4 * (d + 1), 64)
    sup = _grid_sup(P, G, cfg)
    if sup == 0:
        return 0.0
    return max(_grid_sup(shift_poly(P, n), G, cfg) / (math.log(n + 2) * sup) for n in range(d + 1))


# --------------------------------------------------------------------------
# gallery
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GalleryInstance:
    name: str
    description: str
    C: np.ndarray
    E: np.ndarray
    checks: dict[str, float] = field(default_factory=dict)
    power_formula: Callable[[int], np.ndarray] | None = None

    @property
    def T(self) -> np.ndarray:
        return self.C + self.E


GALLERY_NAMES = ("remark35", "foguel-car-w")


def _remark35(cfg) -> GalleryInstance:
    C = np.eye(2, dtype=np.complex128)
    E = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    checks = {
        "E^2": _norm(E @ E, cfg),
        "EC - E": _norm(E @ C - E, cfg),
        "CE - E": _norm(C @ E - E, cfg),
    }
    return GalleryInstance(
        "remark35",
        "T = I + [[0,1],[0,0]]: nilpotent perturbation with EC = CE = E != 0; T^n = [[1,n],[0,1]]",
        C, E, checks,
        power_formula=lambda n: np.array([[1, n], [0, 1]], dtype=np.complex128),
    )


def _foguel_car(cfg, alpha=(0.0, 1.0), blocks: int = 3, modes: int = 2) -> GalleryInstance:
    from .car import HankelSpec, foguel_hankel

    b = foguel_hankel(HankelSpec(tuple(alpha), blocks, modes))
    k = b.k_dim
    n = k + b.h_dim
    C = np.zeros((n, n), dtype=np.complex128)
    C[:k, :k], C[k:, k:] = b.T.matrix, b.V.matrix
    E = np.zeros_like(C)
    E[:k, k:] = b.X
    checks = {
        "E^2": _norm(E @ E, cfg),
        "EC - CE": _norm(E @ C - C @ E, cfg),
        "S*G - GS": _norm(b.T.matrix @ b.X - b.X @ b.V.matrix, cfg),
    }
    return GalleryInstance(
        "foguel-car-w",
        f"CAR-valued Foguel-Hankel block [[S*, G],[0, S]] with alpha={list(alpha)}, "
        f"{blocks} blocks, {modes} modes: E^2 = 0 and EC = CE",
        C, E, checks,
    )


def gallery(cfg: ToleranceConfig = DEFAULT_TOL) -> dict[str, GalleryInstance]:
    """Named counterexample instances."""
    return {"remark35": _remark35(cfg), "foguel-car-w": _foguel_car(cfg)}
