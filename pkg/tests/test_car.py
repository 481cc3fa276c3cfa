import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commlab.car import (
    MODE_CAP,
    HankelSpec,
    a_alpha,
    b_alpha,
    car_generators,
    car_relation_residuals,
    first_block_projection,
    foguel_diagonal,
    foguel_hankel,
    gamma_n_identity_check,
    hankel_gamma,
    intertwining_residual,
    weighted_hankel,
    weighted_hankel_bound_check,
)
from commlab.operators import assemble_R

from oracles import bitwise_annihilator, jacobi_norm, naive_power


# -- generators ---------------------------------------------------------------------

@pytest.mark.parametrize("m", range(1, 7))
def test_relations_exact(m):
    alg = car_generators(m)
    assert alg.dimension == 2 ** m
    assert car_relation_residuals(alg) == (0.0, 0.0)


@pytest.mark.parametrize("m", [1, 3, 5])
def test_generators_match_bitwise_construction(m):
    for j, g in enumerate(car_generators(m).generators):
        assert np.array_equal(g, bitwise_annihilator(j, m))


def test_generators_are_read_only():
    g = car_generators(2).generators[0]
    with pytest.raises(ValueError):
        g[0, 0] = 1.0


def test_mode_cap():
    with pytest.raises(ValueError):
        car_generators(MODE_CAP + 1)
    with pytest.raises(ValueError):
        car_generators(0)
    assert car_generators(3, cap=3).modes == 3


# -- Hankel data --------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        HankelSpec((1.0, 1.0, 1.0), 4, 2)  # support longer than the mode count
    with pytest.raises(ValueError):
        HankelSpec((1.0,), 1, 1)
    with pytest.raises(ValueError):
        HankelSpec((1.0,), 4, MODE_CAP + 1)
    # trailing zeros do not count towards the support
    assert HankelSpec((1.0, 0.0, 0.0), 4, 1).support == 1


def test_hankel_blocks():
    spec = HankelSpec((0.5, -2.0j), 3, 2)
    G = hankel_gamma(spec)
    gens = car_generators(2).generators
    d = 4
    for i in range(3):
        for j in range(3):
            block = G[i * d:(i + 1) * d, j * d:(j + 1) * d]
            ref = spec.alpha[i + j] * gens[i + j] if i + j < 2 else 0 * gens[0]
            assert np.array_equal(block, ref)
    W = weighted_hankel(spec)
    assert np.array_equal(W[:d, d:2 * d], 2 * G[:d, d:2 * d])


@pytest.mark.parametrize("alpha", [(1.0,), (0.0, 1.0), (0.3, -0.2j, 0.5)])
def test_intertwining_exact(alpha):
    spec = HankelSpec(alpha, 5, len(alpha))
    assert intertwining_residual(spec) == 0.0


@pytest.mark.parametrize("alpha", [(1.0,), (0.0, 1.0), (1.0, 0.5, 0.25)])
def test_gamma_n_identity(alpha):
    spec = HankelSpec(alpha, 6, len(alpha))
    res = gamma_n_identity_check(spec)
    assert len(res) == foguel_hankel(spec).V.guard
    assert max(res) <= 1e-12


def test_gamma_n_against_direct_sum():
    spec = HankelSpec((0.7, 0.4), 5, 2)
    R = assemble_R(foguel_hankel(spec)).matrix
    G = hankel_gamma(spec)
    S = foguel_hankel(spec).V.matrix
    k = G.shape[0]
    for n in range(1, 5):
        direct = sum(naive_power(S.conj().T, j) @ G @ naive_power(S, n - j - 1) for j in range(n))
        assert np.allclose(naive_power(R, n)[:k, k:], direct, atol=1e-12)


# -- scalar criteria ----------------------------------------------------------------

def test_a_and_b_values():
    assert a_alpha(()) == 0.0 and b_alpha(()) == 0.0
    # alpha = (0, 1): A = max(1*1, 4*1) = 4, B = 4
    assert a_alpha((0.0, 1.0)) == 4.0 and b_alpha((0.0, 1.0)) == 4.0
    # alpha = (1, 1, 1): tails 3, 2, 1 -> A = max(3, 8, 9) = 9; B = 1 + 4 + 9
    assert a_alpha((1.0, 1.0, 1.0)) == 9.0 and b_alpha((1.0, 1.0, 1.0)) == 14.0
    assert b_alpha((1j,)) == 1.0


def test_weighted_hankel_norm_alpha01():
    rep = weighted_hankel_bound_check(HankelSpec((0.0, 1.0), 3, 2))
    assert rep.norm == pytest.approx(2.0, abs=1e-12)
    assert rep.bound == 2.0 and rep.holds


@settings(max_examples=20, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=3),
       st.integers(2, 4))
def test_weighted_hankel_bound_random(alpha, blocks):
    spec = HankelSpec(tuple(alpha), blocks, max(len(alpha), 1))
    rep = weighted_hankel_bound_check(spec)
    assert rep.holds
    assert rep.norm <= math.sqrt(b_alpha(spec.alpha)) + 1e-8
    if np.any(weighted_hankel(spec)):
        assert rep.norm == pytest.approx(jacobi_norm(weighted_hankel(spec)), rel=1e-9)


# -- block operators ----------------------------------------------------------------

def test_foguel_hankel_shapes_and_projection():
    spec = HankelSpec((1.0,), 3, 1)
    b = foguel_hankel(spec)
    assert b.T.ambient == "shift" and b.V.ambient == "shift"
    P = first_block_projection(b)
    k = b.k_dim
    assert np.array_equal(P @ P, P)
    assert np.trace(P).real == b.V.block_size
    assert not np.any(P[:k, :])


def test_foguel_diagonal():
    b = foguel_diagonal([1, 0, 1, 1])
    assert np.array_equal(np.diag(b.X), [1, 0, 1, 1])
    with pytest.raises(ValueError):
        foguel_diagonal([1, 2])
