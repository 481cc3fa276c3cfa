import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commlab.car import HankelSpec, b_alpha
from commlab.operators import BetaSequence, block_projection, truncated_shift, weighted_shift
from commlab.nearness import (
    BuildRefused,
    NotAProjection,
    build_renorm_model,
    car_nearness_check,
    depth_curve,
    near_gram,
    near_modulo_equivalence_check,
    near_row,
    parallelogram_check,
    renorm_contraction_check,
    renorm_equivalence,
    renorm_value,
)

from oracles import jacobi_norm, kkt_min_norm, naive_power


def _complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _contraction(rng, n, norm=0.9):
    a = _complex(rng, n, n)
    return norm * a / np.linalg.norm(a, 2)


# -- nearness ------------------------------------------------------------------------

def test_identical_operators_are_at_distance_zero():
    rng = np.random.default_rng(0)
    T = _complex(rng, 4, 4)
    assert near_gram(T, T, None, 6).s_gram == 0.0
    assert near_row(T, T, None, 6).s_row == 0.0


def test_nilpotent_against_zero_matches_row_oracle():
    J = np.diag(np.array([1.0, 2.0, 0.5, 3.0]), k=1)
    rep = near_gram(J, np.zeros_like(J), None, 6)
    row = np.hstack([naive_power(J, n) for n in range(1, 7)])
    assert rep.s_gram == pytest.approx(jacobi_norm(row), rel=1e-10)


def test_geometric_weights_nested_and_orthogonal_ranges():
    # beta(n) = 2^n, T = 2S: the n-th Gram term is S^n S*^n, the projection
    # onto blocks n..N.  These ranges are nested, so the sum has norm N; only
    # modulo block 0 do the ranges (block n alone) become orthogonal.
    N = 8
    S = truncated_shift(1, N + 1).matrix
    beta = BetaSequence.constant(2.0, N)
    rep = near_gram(2 * S, np.zeros_like(S), beta, N)
    assert rep.s_gram == pytest.approx(np.sqrt(N), rel=1e-12)
    P0 = block_projection(1, N + 1, [0])
    assert near_row(2 * S, np.zeros_like(S), beta, N, P0).s_row == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(0, 12), st.booleans(), st.integers(0, 2**31 - 1))
def test_gram_and_row_forms_agree(m, N, weighted, seed):
    rng = np.random.default_rng(seed)
    T, C = _contraction(rng, m), _contraction(rng, m)
    beta = BetaSequence(tuple(rng.uniform(0.5, 2.0, N))) if weighted else None
    g = near_gram(T, C, beta, N)
    r = near_row(T, C, beta, N)
    assert abs(g.s_gram - r.s_row) <= 1e-8
    assert all(b >= a - 1e-12 for a, b in zip(r.per_N_row, r.per_N_row[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(g.per_N_gram, g.per_N_gram[1:]))


def test_unit_weights_same_as_default():
    rng = np.random.default_rng(1)
    T, C = _contraction(rng, 3), _contraction(rng, 3)
    a = near_row(T, C, None, 5)
    b = near_row(T, C, BetaSequence.constant(1.0, 5), 5)
    assert a.per_N_row == b.per_N_row


def test_weighted_shift_modulo_first_block_is_one():
    weights = (0.5, 2.0, 1.5, 0.25, 3.0, 1.0, 0.8)
    beta = BetaSequence(weights)
    N = len(weights)
    S = weighted_shift(beta, 2, N + 1).matrix
    P0 = block_projection(2, N + 1, [0])
    rep = near_row(S, np.zeros_like(S), beta, N, P0)
    assert rep.s_row == pytest.approx(1.0, abs=1e-10)


def test_shift_modulo_kernel_of_adjoint_is_one():
    S = truncated_shift(3, 6)
    P0 = block_projection(3, 6, [0])
    # block 0 is exactly the kernel of S* on the window
    assert not np.any(S.matrix.conj().T @ P0)
    rep = near_row(S, np.zeros_like(S.matrix), None, 5, P0)
    assert rep.s_row == pytest.approx(1.0, abs=1e-10)


def test_projection_is_validated():
    with pytest.raises(NotAProjection):
        near_row(np.eye(2), np.zeros((2, 2)), None, 3, np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_modulo_equivalence_check():
    rng = np.random.default_rng(2)
    T, C = _contraction(rng, 4), _contraction(rng, 4)
    rep = near_modulo_equivalence_check(T, C, None, np.diag([1.0, 1.0, 0.0, 0.0]), 8)
    assert rep.agree
    assert rep.s_row_projected <= rep.s_row + 1e-12


def test_short_beta_rejected():
    with pytest.raises(ValueError):
        near_row(np.eye(2), np.zeros((2, 2)), BetaSequence((1.0,)), 4)


# -- renorming -------------------------------------------------------------------------

def _model(seed=0, d=2, N=8, weights=None, xscale=0.8, M=None):
    rng = np.random.default_rng(seed)
    beta = BetaSequence(tuple(weights if weights is not None else rng.uniform(0.5, 1.0, N)))
    S = weighted_shift(beta, d, N)
    T = _contraction(rng, 3, 0.95)
    X = xscale * _complex(rng, 3, d * N)
    return build_renorm_model(T, X, S, beta, M), rng


def test_recurrence_and_constant():
    model, _ = _model()
    assert model.recurrence_residual <= 1e-13
    zero, _ = _model(xscale=0.0)
    assert zero.nearness_constant == 0.0


def test_depth_zero_gram_is_identity():
    model, rng = _model(M=0)
    k, h = _complex(rng, 3), np.zeros(16)
    # c = k, G_0 = I: value = 2||k||^2
    assert renorm_value(model, k, h).value == pytest.approx(2 * np.vdot(k, k).real)


def test_zero_operators_closed_form():
    beta = BetaSequence.constant(1.0, 6)
    model = build_renorm_model(np.zeros((2, 2)), np.zeros((2, 6)), weighted_shift(beta, 1, 6), beta)
    rng = np.random.default_rng(3)
    k, h = _complex(rng, 2), _complex(rng, 6)
    nk, nh = np.vdot(k, k).real, np.vdot(h, h).real
    assert renorm_value(model, k, h).value == pytest.approx(2 * nk + nh)
    assert renorm_value(model, np.zeros(2), h).value == pytest.approx(nh)
    eq = renorm_equivalence(model, 200, seed=1)
    assert 1.0 - 1e-12 <= eq.c_lower and eq.c_upper <= 2.0 + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_matches_kkt(seed):
    model, rng = _model(seed)
    k, h = _complex(rng, 3), _complex(rng, 16)
    got = renorm_value(model, k, h)
    # independent evaluation of the infimum
    T = model.T
    row = np.hstack([naive_power(T, n) for n in range(model.M + 1)])
    c = k.copy()
    for n in range(model.blocks):
        Xn = sum(naive_power(T, j) @ model.X @ naive_power(model.S, n - j - 1) for j in range(n)) if n else 0 * model.X
        c = c - Xn[:, :2] @ h[2 * n:2 * n + 2] / model.beta[n]
    _, inner = kkt_min_norm(row, c)
    ref = np.vdot(c, c).real + np.vdot(h, h).real + inner
    assert got.value == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_depth_curve_non_increasing():
    model, rng = _model(4)
    curve = depth_curve(model, _complex(rng, 3), _complex(rng, 16))
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


def test_build_refused_when_not_power_bounded():
    beta = BetaSequence.constant(10.0, 8)
    with pytest.raises(BuildRefused):
        build_renorm_model(np.zeros((1, 1)), np.zeros((1, 8)), weighted_shift(beta, 1, 8), beta)


def test_build_requires_shift():
    from commlab.operators import finite

    with pytest.raises(TypeError):
        build_renorm_model(np.eye(1), np.zeros((1, 2)), finite(np.eye(2)), BetaSequence.constant(1.0, 2))


def test_equivalence_inside_envelope():
    model, _ = _model(5)
    eq = renorm_equivalence(model, 100, seed=2)
    assert eq.within
    assert eq.envelope_lower <= eq.c_lower <= eq.c_upper <= eq.envelope_upper


def test_contraction_from_solved_commutator():
    N = 10
    S = truncated_shift(1, N)
    T = S.adjoint.matrix
    rng = np.random.default_rng(6)
    Z = _complex(rng, N, N)
    X = T @ Z - Z @ S.matrix
    model = build_renorm_model(T, X, S, BetaSequence.constant(1.0, N))
    rep = renorm_contraction_check(model, 200, seed=3)
    assert rep.precondition and rep.passed
    assert rep.decomposition_residual <= 1e-12


def test_contraction_with_weights():
    model, _ = _model(7, weights=[0.9, 0.6, 1.0, 0.7, 0.8, 0.95, 0.5, 1.0])
    rep = renorm_contraction_check(model, 100, seed=4)
    assert rep.passed and rep.max_excess <= 0 and rep.max_exact_excess <= 0


def test_parallelogram():
    model, _ = _model(8)
    assert parallelogram_check(model, 30, seed=5) < 1e-9


def test_renorm_value_shape_error():
    model, _ = _model(9)
    with pytest.raises(ValueError):
        renorm_value(model, np.zeros(2), np.zeros(16))


# -- CAR linkage ------------------------------------------------------------------------

def test_car_nearness_alpha01():
    rep = car_nearness_check(HankelSpec((0.0, 1.0), 3, 2))
    assert rep["nearness"] == pytest.approx(2.0, abs=1e-10)
    assert rep["sqrt_b_alpha"] == pytest.approx(np.sqrt(b_alpha((0.0, 1.0))))
    assert rep["holds"]
