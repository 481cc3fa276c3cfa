"""Independent reference computations used by the tests.

None of these share code with the package: the largest singular value
comes from one-sided Jacobi rotations, constrained minima from the full
KKT system, polynomial values from scalar Horner loops, and the frozen
constants below from 30-digit mpmath quadrature and series evaluation.
"""

from __future__ import annotations

import math

import numpy as np

# (1/pi) * int_0^pi |sin((n+1/2)t) / sin(t/2)| dt, mpmath quad split at the zeros, 30 digits
LEBESGUE = {
    0: 1.0,
    1: 1.4359911241769174324,
    2: 1.6421884352221211369,
    3: 1.778322861525875863,
    4: 1.8800805991023553999,
    5: 1.9613605937660149475,
}

# closed form of the n = 1 value
LEBESGUE_1_CLOSED = 1.0 / 3.0 + 2.0 * math.sqrt(3.0) / math.pi

# sum_{n>=0} log(n+2) r^n, mpmath nsum, 30 digits
LOG_SERIES = {0.5: 2.0313356914737535688, 0.9: 20.718435619658923615}


def jacobi_singular_values(a, sweeps: int = 60, tol: float = 1e-15) -> np.ndarray:
    """Singular values by one-sided Jacobi (Hestenes) orthogonalisation of the columns."""
    u = np.array(a, dtype=np.complex128)
    if u.shape[0] < u.shape[1]:
        u = u.conj().T.copy()
    n = u.shape[1]
    for _ in range(sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = np.vdot(u[:, p], u[:, p]).real
                beta = np.vdot(u[:, q], u[:, q]).real
                gamma = np.vdot(u[:, p], u[:, q])
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or abs(gamma) == 0:
                    continue
                with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                    phase = gamma / abs(gamma)
                    zeta = float((beta - alpha) / (2 * abs(gamma)))
                if not (math.isfinite(zeta) and np.isfinite(phase)):
                    continue  # the rotation angle underflows to zero
                rotated = True
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1 / math.sqrt(1 + t * t)
                s = c * t
                up, uq = u[:, p].copy(), u[:, q].copy()
                u[:, p] = c * up - s * np.conj(phase) * uq
                u[:, q] = s * phase * up + c * uq
        if not rotated:
            break
    return np.sort(np.linalg.norm(u, axis=0))[::-1]


def jacobi_norm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(jacobi_singular_values(a)[0])


def kkt_min_norm(a, c) -> tuple[np.ndarray, float]:
    """min ||x||^2 subject to a x = c via the saddle-point system [[I, a*], [a, 0]]."""
    a = np.asarray(a, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    m, n = a.shape
    kkt = np.zeros((n + m, n + m), dtype=np.complex128)
    kkt[:n, :n] = np.eye(n)
    kkt[:n, n:] = a.conj().T
    kkt[n:, :n] = a
    rhs = np.concatenate([np.zeros(n, dtype=np.complex128), c])
    sol = np.linalg.solve(kkt, rhs)
    x = sol[:n]
    return x, float(np.vdot(x, x).real)


def horner_matrix_poly(coeffs, z: complex) -> np.ndarray:
    """sum_j coeffs[j] z^j entry by entry with scalar Horner loops."""
    coeffs = np.asarray(coeffs)
    d1, p, _ = coeffs.shape
    out = np.zeros((p, p), dtype=np.complex128)
    for i in range(p):
        for j in range(p):
            acc = 0j
            for k in range(d1 - 1, -1, -1):
                acc = acc * z + coeffs[k, i, j]
            out[i, j] = acc
    return out


def naive_power(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    out = np.eye(a.shape[0], dtype=np.complex128)
    for _ in range(n):
        out = out @ a
    return out


def kron_sylvester_oracle(T, V, X) -> np.ndarray:
    """Solve T Z - Z V = X by explicit entry-wise assembly of the linear system (row-major unknowns)."""
    T, V, X = (np.asarray(m, dtype=np.complex128) for m in (T, V, X))
    k, h = X.shape
    A = np.zeros((k * h, k * h), dtype=np.complex128)
    for i in range(k):
        for j in range(h):
            row = i * h + j
            for l in range(k):
                A[row, l * h + j] += T[i, l]
            for l in range(h):
                A[row, i * h + l] -= V[l, j]
    return np.linalg.solve(A, X.reshape(-1)).reshape(k, h)


def bitwise_annihilator(j: int, m: int) -> np.ndarray:
    """Fermionic annihilator on mode ``j`` of ``m``, assembled entry by entry.

    Basis states are bit strings with mode 0 as the most significant bit.  The
    operator clears bit ``j`` of an occupied state and picks up the sign
    ``(-1)^(number of occupied modes before j)``.
    """
    dim = 2 ** m
    out = np.zeros((dim, dim))
    bit = 1 << (m - 1 - j)
    for col in range(dim):
        if col & bit:
            before = bin(col >> (m - j)).count("1")
            out[col ^ bit, col] = (-1) ** before
    return out
