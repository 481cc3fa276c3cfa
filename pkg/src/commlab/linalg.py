"""Dense complex kernels shared by every analysis.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  All functions
are pure: inputs are never modified.

The Kronecker convention used throughout is column-major vectorisation::

    kron(A, B) @ vec(Z) == vec(B @ Z @ A.T)

so the commutator map ``Z -> T Z - Z V`` has matrix
``kron(I, T) - kron(V.T, I)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as spla
from scipy.linalg import lapack

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOL",
    "NormNotConverged",
    "SingularMatrixError",
    "SizeCapExceeded",
    "as_matrix",
    "adjoint",
    "operator_norm",
    "spectral_radius",
    "lu_solve",
    "Solved",
    "kron",
    "vec",
    "unvec",
    "min_norm_constrained",
    "gram_cholesky",
    "matrix_power",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Tolerances and caps used by the kernels.

    ``solve_tol`` bounds relative residuals of linear solves and decides
    numerical singularity (condition above ``1/solve_tol``); ``norm_tol`` is
    the relative accuracy target of iterative norm estimates;
    ``identity_tol`` is the absolute bound (scaled by the operand norm) for
    checks of exact identities.
    """

    solve_tol: float = 1e-10
    norm_tol: float = 1e-10
    identity_tol: float = 1e-10
    max_iter: int = 2000
    size_cap: int = 4096
    gram_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("solve_tol", "norm_tol", "identity_tol", "gram_floor"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if self.max_iter < 1 or self.size_cap < 1:
            raise ValueError("max_iter and size_cap must be positive")


DEFAULT_TOL = ToleranceConfig()


class NormNotConverged(RuntimeError):
    """Power iteration hit its cap; ``estimate`` holds the last iterate."""

    def __init__(self, estimate: float, residual: float, vector: np.ndarray):
        super().__init__(
            f"norm estimate unconverged: last value {estimate:.17g}, "
            f"relative residual {residual:.3e}"
        )
        self.estimate = estimate
        self.residual = residual
        self.vector = vector


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised for numerically singular systems; ``pivot`` is the failing index."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class SizeCapExceeded(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D complex128 array (scalars become 1x1)."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def adjoint(a) -> np.ndarray:
    return as_matrix(a).conj().T


def matrix_power(a, n: int) -> np.ndarray:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix power needs a square matrix, got {a.shape}")
    return np.linalg.matrix_power(a, n)


# --------------------------------------------------------------------------
# norm estimation
# --------------------------------------------------------------------------

def _dominant_projector(gram: np.ndarray, max_squarings: int) -> np.ndarray:
    """Trace-normalised ``gram**(2**s)``: close to the projector onto the top eigenspace.

    Squaring stops once the normalised power is numerically rank one.  With a
    repeated top eigenvalue the power tends to a higher-rank projector, which
    still maps every start vector into the dominant eigenspace.
    """
    b = gram / np.trace(gram).real
    for _ in range(max_squarings):
        b = b @ b
        b = 0.5 * (b + b.conj().T)
        tr = np.trace(b).real
        if tr <= 0:
            break
        b /= tr
        # tr(B^2) == 1 exactly when the normalised B is a rank-one projector
        if 1.0 - np.vdot(b, b).real < 1e-14:
            break
    return b


def _refine(gram: np.ndarray, x: np.ndarray, cfg: ToleranceConfig) -> tuple[float, np.ndarray, bool, float]:
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0, x, True, 0.0
    x = x / nx
    lam_prev = -1.0
    lam, rel = 0.0, math.inf
    for _ in range(cfg.max_iter):
        y = gram @ x
        lam = float(np.vdot(x, y).real)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0, x, True, 0.0
        rel = float(np.linalg.norm(y - lam * x)) / max(lam, np.finfo(float).tiny)
        if rel <= cfg.norm_tol:
            return lam, x, True, rel
        # stagnation at rounding level counts as converged
        if abs(lam - lam_prev) <= 4 * np.finfo(float).eps * lam:
            return lam, x, True, rel
        lam_prev = lam
        x = y / ny
    return lam, x, False, rel


def operator_norm(a, cfg: ToleranceConfig = DEFAULT_TOL) -> float:
    """Largest singular value of ``a`` by power iteration on its Gram matrix.

    The iteration runs on the smaller of ``A*A`` and ``AA*``.  Two start
    vectors, the all-ones vector and a seeded random one, are pushed through
    a high power of the Gram matrix obtained by repeated squaring, which
    removes all but the dominant eigencomponents even when the top
    eigenvalues are clustered or repeated.  The random start guards against
    the ones vector being orthogonal to the dominant subspace.  The larger
    of the two Rayleigh quotients is returned.
    """
    a = as_matrix(a)
    if a.size == 0:
        raise ValueError("operator_norm of an empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("operator_norm: matrix has non-finite entries")
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return 0.0
    a = a / scale
    gram = a.conj().T @ a if a.shape[1] <= a.shape[0] else a @ a.conj().T
    n = gram.shape[0]
    if n == 1:
        return math.sqrt(max(gram[0, 0].real, 0.0)) * scale

    squarings = 40 if n <= 128 else (16 if n <= 512 else 6)
    rng = np.random.default_rng(cfg.seed)
    ones = np.ones(n, dtype=np.complex128) / math.sqrt(n)
    rand = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    proj = _dominant_projector(gram, squarings)
    best = -1.0
    for x0 in (proj @ ones, proj @ rand):
        lam, x, ok, rel = _refine(gram, x0, cfg)
        if not ok:
            raise NormNotConverged(math.sqrt(max(lam, 0.0)) * scale, rel, x)
        best = max(best, lam)
    return math.sqrt(max(best, 0.0)) * scale


def spectral_radius(a, cfg: ToleranceConfig = DEFAULT_TOL, *, max_squarings: int = 64,
                    threshold: float = 1e300) -> float:
    """Gelfand estimate ``||A^(2^k)||^(2^-k)`` with repeated squaring.

    Powers are kept normalised and their scale tracked in log form, so
    neither overflow nor underflow occurs for large ``k``.  Every iterate is
    an upper bound for the true radius; the last one is returned once the
    relative change drops below ``cfg.norm_tol``.  ``math.inf`` is returned
    when the estimate exceeds ``threshold`` (a "radius at least threshold"
    verdict rather than a number).

    The stopping test is armed only once ``2^k >= 2n``: before that a
    nilpotent or Jordan-like part can hold the sequence on a plateau
    (``||S^m|| = 1`` for the ``n x n`` shift until ``m = n``).
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got {a.shape}")
    nrm = operator_norm(a, cfg)
    if nrm == 0.0:
        return 0.0
    log_scale = math.log(nrm)
    b = a / nrm
    estimate = nrm
    for k in range(1, max_squarings + 1):
        b = b @ b
        nb = operator_norm(b, cfg)
        if nb == 0.0:
            return 0.0
        b /= nb
        log_scale = 2.0 * log_scale + math.log(nb)
        new = math.exp(log_scale / 2.0**k)
        if new > threshold:
            return math.inf
        if 2**k >= 2 * a.shape[0] and abs(new - estimate) <= cfg.norm_tol * new:
            return new
        estimate = new
    return estimate


# --------------------------------------------------------------------------
# linear solves
# --------------------------------------------------------------------------

class Solved(NamedTuple):
    x: np.ndarray
    condition: float


def _condition_estimate(lu: np.ndarray, piv: np.ndarray, anorm: float) -> float:
    gecon, = lapack.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0:
        return math.inf
    return 1.0 / rcond


def lu_solve(a, b, cfg: ToleranceConfig = DEFAULT_TOL) -> Solved:
    """Solve ``A X = B`` by LU with partial pivoting.

    Returns the solution and a 1-norm condition estimate.  A pivot below
    ``n * eps * max|A|`` raises :class:`SingularMatrixError`.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"lu_solve needs a square matrix, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {a.shape[0]}")
    n = a.shape[0]
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    if amax == 0.0:
        raise SingularMatrixError("numerically singular: zero matrix", pivot=0)
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", spla.LinAlgWarning)
        lu, piv = spla.lu_factor(a, check_finite=True)
    diag = np.abs(np.diag(lu))
    floor = n * np.finfo(float).eps * amax
    bad = np.flatnonzero(diag <= floor)
    if bad.size:
        raise SingularMatrixError(
            f"numerically singular: pivot {int(bad[0])} is {diag[bad[0]]:.3e}", pivot=int(bad[0])
        )
    anorm = float(np.max(np.sum(np.abs(a), axis=0)))
    cond = _condition_estimate(lu, piv, anorm)
    x = spla.lu_solve((lu, piv), b)
    # Frobenius norms: a cheap upper bound on the spectral residual
    res = np.linalg.norm(a @ x - b)
    if res > max(cfg.solve_tol * np.linalg.norm(a) * np.linalg.norm(x), floor * np.linalg.norm(b)):
        if cond * cfg.solve_tol > 1:
            raise SingularMatrixError(f"numerically singular: condition estimate {cond:.3e}")
    return Solved(x, cond)


# --------------------------------------------------------------------------
# Kronecker products
# --------------------------------------------------------------------------

def vec(z) -> np.ndarray:
    """Column-major vectorisation."""
    return as_matrix(z).reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v, dtype=np.complex128).reshape((rows, cols), order="F")


def kron(a, b, cfg: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Kronecker product with a size cap on the result's row count.

    ``kron(A, B) @ vec(Z) == vec(B @ Z @ A.T)``.
    """
    a, b = as_matrix(a), as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > cfg.size_cap:
        raise SizeCapExceeded(
            f"Kronecker product would be {rows}x{cols}, above the cap {cfg.size_cap}"
        )
    return np.kron(a, b)


# --------------------------------------------------------------------------
# minimum-norm solutions of underdetermined systems
# --------------------------------------------------------------------------

def min_norm_constrained(a, c, cfg: ToleranceConfig = DEFAULT_TOL, *,
                         gram_factor=None) -> tuple[np.ndarray, float]:
    """Minimise ``||kappa||^2`` subject to ``A kappa = c``.

    Uses the normal system ``kappa = A* (AA*)^{-1} c``; the minimum is
    ``<(AA*)^{-1} c, c>``.  ``gram_factor`` may carry a cached
    ``scipy.linalg.cho_factor`` of ``AA*``.
    """
    a = as_matrix(a)
    c = np.asarray(c, dtype=np.complex128).reshape(-1)
    if c.shape[0] != a.shape[0]:
        raise ValueError(f"constraint vector has length {c.shape[0]}, expected {a.shape[0]}")
    if gram_factor is None:
        gram_factor = gram_cholesky(a @ a.conj().T, cfg)
    y = spla.cho_solve(gram_factor, c)
    kappa = a.conj().T @ y
    value = float(np.vdot(c, y).real)
    return kappa, value


def gram_cholesky(gram, cfg: ToleranceConfig = DEFAULT_TOL):
    """Cholesky factor of a Hermitian matrix required to dominate ``gram_floor * I``."""
    gram = as_matrix(gram)
    gram = 0.5 * (gram + gram.conj().T)
    try:
        factor = spla.cho_factor(gram, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"numerically singular Gram matrix: {exc}") from exc
    diag = np.abs(np.diag(factor[0])) ** 2
    bad = np.flatnonzero(diag < cfg.gram_floor)
    if bad.size:
        raise SingularMatrixError(
            f"numerically singular Gram matrix: pivot {int(bad[0])} is {diag[bad[0]]:.3e}",
            pivot=int(bad[0]),
        )
    return factor
