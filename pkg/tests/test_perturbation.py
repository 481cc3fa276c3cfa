import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commlab.perturbation import (
    GALLERY_NAMES,
    MatrixPolynomial,
    dirichlet_l1,
    eval_poly_at_operator,
    gallery,
    measured_log_constant,
    power_expansion_residual,
    rota_summability,
    shift_bound_check,
    shift_poly,
    sup_circle_norm,
    verify_sum_identity,
    zero_product_check,
)

from oracles import (
    LEBESGUE,
    LEBESGUE_1_CLOSED,
    LOG_SERIES,
    horner_matrix_poly,
    jacobi_norm,
    naive_power,
)


def _complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def zero_product_pair(rng, m, rank):
    """C with range in a subspace W and E vanishing on W, so that E C = 0."""
    B, _ = np.linalg.qr(_complex(rng, m, rank))
    C = B @ _complex(rng, rank, m)
    E = _complex(rng, m, m) @ (np.eye(m) - B @ B.conj().T)
    return C, E


# -- matrix polynomials ----------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_polynomial_evaluation_matches_horner(d, p, seed):
    rng = np.random.default_rng(seed)
    P = MatrixPolynomial(_complex(rng, d + 1, p, p))
    z = complex(*rng.standard_normal(2))
    ref = horner_matrix_poly(P.coeffs, z)
    assert np.allclose(P(z), ref, atol=1e-12 * max(1.0, np.abs(ref).max()))
    assert np.allclose(P.on_grid(np.array([z]))[0], ref, atol=1e-10 * max(1.0, np.abs(ref).max()))


def test_polynomial_shape_validation():
    with pytest.raises(ValueError):
        MatrixPolynomial(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        MatrixPolynomial(np.zeros((0, 2, 2)))


def test_shift_poly_drops_terms():
    P = MatrixPolynomial.scalar([1.0, 2.0, 3.0])
    assert np.allclose(shift_poly(P, 1).coeffs.ravel(), [2.0, 3.0])
    assert shift_poly(P, 3).degree == -1
    assert np.array_equal(shift_poly(P, 0).coeffs, P.coeffs)
    with pytest.raises(ValueError):
        shift_poly(P, -1)


def test_shift_recursion_identity():
    # P(z) = A_0 + z P_(1)(z)
    rng = np.random.default_rng(0)
    P = MatrixPolynomial(_complex(rng, 5, 2, 2))
    z = 0.3 + 0.8j
    assert np.allclose(P(z), P.coeffs[0] + z * shift_poly(P, 1)(z))


def test_eval_at_operator_block_structure():
    rng = np.random.default_rng(1)
    P = MatrixPolynomial(_complex(rng, 3, 2, 2))
    T = _complex(rng, 3, 3)
    out = eval_poly_at_operator(P, T)
    for a in range(2):
        for b in range(2):
            ref = sum(P.coeffs[j, a, b] * naive_power(T, j) for j in range(3))
            assert np.allclose(out[3 * a:3 * a + 3, 3 * b:3 * b + 3], ref)


# -- zero-product identities ------------------------------------------------------

def test_zero_product_check_reports():
    rng = np.random.default_rng(2)
    C, E = zero_product_pair(rng, 5, 2)
    rep = zero_product_check(E, C)
    assert rep.zero_product and rep.ec_norm <= 1e-12
    nil = zero_product_check(np.diag([1.0], k=1), np.zeros((2, 2)))
    assert nil.nilpotency_order == 2 and nil.spectral_radius == 0.0
    assert zero_product_check(np.eye(2), np.eye(2)).nilpotency_order is None


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_power_expansion_under_zero_product(m, n, seed):
    rng = np.random.default_rng(seed)
    C, E = zero_product_pair(rng, m, max(1, m // 2))
    C, E = C / jacobi_norm(C), E / jacobi_norm(E)
    assert power_expansion_residual(C, E, n) <= 1e-11 * (n + 1)


def test_power_expansion_fails_without_zero_product():
    C = np.eye(2)
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    # (I + E)^n = I + nE but the expansion gives I + E
    assert power_expansion_residual(C, E, 5) == pytest.approx(4.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 8), st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_sum_identity_against_direct_expansion(p, d, m, seed):
    rng = np.random.default_rng(seed)
    C, E = zero_product_pair(rng, m, max(1, m // 2))
    C, E = 0.8 * C / jacobi_norm(C), 0.8 * E / jacobi_norm(E)
    P = MatrixPolynomial(_complex(rng, d + 1, p, p))
    rep = verify_sum_identity(P, C, E)
    assert rep.precondition
    assert rep.residual <= 1e-10
    # independent right-hand side: sum_n sum_{j>=n} A_j (x) C^{j-n} E^n
    rhs = sum(
        np.kron(P.coeffs[j], naive_power(C, j - n) @ naive_power(E, n))
        for n in range(d + 1) for j in range(n, d + 1)
    )
    lhs = sum(np.kron(P.coeffs[j], naive_power(C + E, j)) for j in range(d + 1))
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_sum_identity_needs_last_term():
    # d = 1: P(C+E) = A_0 + A_1 (C + E) needs the n = 1 term A_1 E
    P = MatrixPolynomial.scalar([0.0, 1.0])
    C = np.zeros((2, 2))
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert verify_sum_identity(P, C, E).residual == 0.0
    truncated = eval_poly_at_operator(P, C)  # the sum stopped at n = 0
    assert jacobi_norm(eval_poly_at_operator(P, C + E) - truncated) == pytest.approx(1.0)


def test_sum_identity_flags_broken_precondition():
    rep = verify_sum_identity(MatrixPolynomial.scalar([0.0, 0.0, 1.0]), np.eye(2), np.diag([1.0], k=1))
    assert not rep.precondition


# -- summability ------------------------------------------------------------------

def test_rota_nilpotent_exact():
    rep = rota_summability(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert rep.verdict == "finite" and rep.tail_bound == 0.0
    assert rep.partial_sum == pytest.approx(math.log(6.0), rel=1e-14)


@pytest.mark.parametrize("r", sorted(LOG_SERIES))
def test_rota_tail_brackets_series(r):
    rep = rota_summability(np.array([[r]]), n_max=40)
    total = LOG_SERIES[r]
    assert rep.partial_sum <= total
    assert total <= rep.partial_sum + rep.tail_bound


def test_rota_tail_non_normal():
    # ||E|| > 1 although r(E) = 0.5: the tail search must look past k = 1
    E = np.array([[0.5, 3.0], [0.0, 0.5]])
    rep = rota_summability(E, n_max=30)
    long = rota_summability(E, n_max=300)
    assert rep.partial_sum + rep.tail_bound >= long.partial_sum


def test_rota_divergent():
    assert rota_summability(np.eye(2)).verdict == "divergent"
    assert rota_summability(np.eye(2)).tail_bound is None


# -- Dirichlet kernel and circle norms -------------------------------------------

@pytest.mark.parametrize("n", sorted(LEBESGUE))
def test_dirichlet_l1_matches_frozen_quadrature(n):
    assert dirichlet_l1(n) == pytest.approx(LEBESGUE[n], abs=1e-9)


def test_dirichlet_l1_closed_form_n1():
    assert dirichlet_l1(1) == pytest.approx(LEBESGUE_1_CLOSED, abs=1e-12)


def test_dirichlet_l1_logarithmic_growth():
    # (4/pi^2) log n + O(1) growth
    vals = [dirichlet_l1(n) for n in (10, 100)]
    assert vals[1] - vals[0] == pytest.approx(4 / math.pi**2 * math.log(10), abs=0.02)
    with pytest.raises(ValueError):
        dirichlet_l1(-1)


def test_sup_circle_norm_scalar():
    res = sup_circle_norm(MatrixPolynomial.scalar([1.0, 1.0]))
    assert res.value == pytest.approx(2.0)
    assert res.refinement_gap <= 1e-12
    with pytest.raises(ValueError):
        sup_circle_norm(MatrixPolynomial.scalar([1.0, 1.0, 1.0]), grid_size=8)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_shift_bound_holds(d, p, seed):
    rng = np.random.default_rng(seed)
    P = MatrixPolynomial(_complex(rng, d + 1, p, p))
    for n in range(1, d + 1):
        rep = shift_bound_check(P, n)
        assert rep.identity_residual <= 1e-10 * max(1.0, rep.sup)
        assert rep.holds


def test_measured_log_constant_positive():
    P = MatrixPolynomial.scalar([1.0, -1.0, 1.0, -1.0])
    A = measured_log_constant(P)
    assert 0 < A < 10


# -- gallery -----------------------------------------------------------------------

def test_gallery_names_and_checks():
    g = gallery()
    assert tuple(g) == GALLERY_NAMES
    for inst in g.values():
        assert max(inst.checks.values()) <= 1e-14


def test_remark35_powers():
    inst = gallery()["remark35"]
    for n in range(1, 65):
        Tn = naive_power(inst.T, n)
        assert np.array_equal(Tn, inst.power_formula(n))
        assert n <= jacobi_norm(Tn) <= n + 2
