import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confball.sequence import (
    BesovBody,
    CoefficientVector,
    NoiseModel,
    besov_contains,
    besov_norm,
    hypercube_theta,
    level_slice,
    make_rng,
    max_level_energy,
    random_boundary_member,
    sample_observation,
    vertex_set_theta,
)


def loop_besov_norm(levels, beta, p, q):
    s = beta + 0.5 - 1 / p
    terms = []
    for j, lev in enumerate(levels):
        lp = sum(abs(x) ** p for x in lev) ** (1 / p)
        terms.append(2 ** (j * s) * lp)
    if math.isinf(q):
        return max(terms)
    return sum(t**q for t in terms) ** (1 / q)


vectors = st.integers(1, 6).flatmap(
    lambda J: st.lists(st.floats(-5, 5), min_size=2**J - 1, max_size=2**J - 1).map(lambda v: CoefficientVector(J, v))
)


def test_level_layout_is_level_major():
    v = CoefficientVector(3, np.arange(7.0))
    assert v.N == 7
    assert v.level(0).tolist() == [0.0]
    assert v.level(1).tolist() == [1.0, 2.0]
    assert v.level(2).tolist() == [3.0, 4.0, 5.0, 6.0]
    assert level_slice(2) == slice(3, 7)


def test_vector_is_read_only_copy():
    src = np.zeros(3)
    v = CoefficientVector(2, src)
    src[0] = 1.0
    assert v.values[0] == 0.0
    with pytest.raises(ValueError):
        v.values[0] = 2.0


@pytest.mark.parametrize("J, values", [(2, [1.0, 2.0]), (0, []), (2, [1.0, math.nan, 0.0])])
def test_vector_rejects_bad_shapes(J, values):
    with pytest.raises(ValueError):
        CoefficientVector(J, values)


def test_from_levels_checks_widths():
    with pytest.raises(ValueError):
        CoefficientVector.from_levels([[1.0], [1.0]])
    assert CoefficientVector.from_levels([[1.0], [2.0, 3.0]]) == CoefficientVector(2, [1, 2, 3])


def test_level_index_out_of_range():
    with pytest.raises(IndexError):
        CoefficientVector.zeros(3).level(3)


def test_arithmetic_and_shape_checks():
    a = CoefficientVector(2, [1, 2, 3])
    b = CoefficientVector(2, [1, 1, 1])
    assert (a - b) == CoefficientVector(2, [0, 1, 2])
    assert (2 * a + b) == CoefficientVector(2, [3, 5, 7])
    with pytest.raises(ValueError):
        a + CoefficientVector.zeros(3)


@given(vectors)
def test_json_round_trip(v):
    back = CoefficientVector.from_json(v.to_json())
    assert back == v
    assert back.to_json() == v.to_json()


def test_json_rejects_extra_keys_and_mismatched_J():
    d = CoefficientVector.zeros(2).to_dict()
    with pytest.raises(ValueError):
        CoefficientVector.from_dict({**d, "n": 3})
    with pytest.raises(ValueError):
        CoefficientVector.from_dict({**d, "J": 3})


@settings(max_examples=60)
@given(vectors, st.floats(0.1, 3), st.sampled_from([2.0, 3.0, 4.5]), st.sampled_from([1.0, 2.0, 3.0, math.inf]))
def test_besov_norm_matches_loop(v, beta, p, q):
    body = BesovBody(beta, p, q, 1.0)
    expected = loop_besov_norm([lev.tolist() for lev in v.levels], beta, p, q)
    assert besov_norm(v, body) == pytest.approx(expected, rel=1e-10, abs=1e-300)


def test_besov_norm_zero_and_containment():
    body = BesovBody(0.5, 2, 2, 1.0)
    assert besov_norm(CoefficientVector.zeros(4), body) == 0.0
    v = CoefficientVector(2, [0.6, 0.4, 0.0])
    # s = 1/2: terms 0.6 and 2**0.5 * 0.4
    assert besov_norm(v, body) == pytest.approx(math.sqrt(0.36 + 0.32))
    assert besov_contains(v, body)
    assert not besov_contains(3 * v, body)


def test_besov_norm_large_q_does_not_overflow():
    v = CoefficientVector(3, [1e3] * 7)
    assert math.isfinite(besov_norm(v, BesovBody(1.0, 2, 400.0, 1.0)))


@pytest.mark.parametrize(
    "kwargs",
    [dict(beta=0.0), dict(beta=0.5, p=1.5), dict(beta=0.5, q=0.5), dict(beta=0.5, M=0.0)],
)
def test_besov_body_validation(kwargs):
    with pytest.raises(ValueError):
        BesovBody(**kwargs)


def test_besov_body_dict_round_trip_with_infinite_q():
    body = BesovBody(1.0, 2.0, math.inf, 3.0)
    d = json.loads(json.dumps(body.to_dict()))
    assert BesovBody.from_dict(d) == body
    with pytest.raises(ValueError):
        BesovBody.from_dict({"beta": 1, "r": 2})


def test_max_level_energy_is_attained_on_the_boundary():
    body = BesovBody(0.75, 2, math.inf, 2.0)
    J, j = 6, 4
    theta = hypercube_theta(J, j, math.sqrt(max_level_energy(body, j) / 2**j))
    assert besov_norm(theta, body) == pytest.approx(body.M)


def test_make_rng_depends_only_on_seed_and_stream():
    a = make_rng(5, 1, 2).standard_normal(4)
    b = make_rng(5, 1, 2).standard_normal(4)
    c = make_rng(5, 2, 1).standard_normal(4)
    d = make_rng([5, 9], 1, 2).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_sample_observation_noise_scale():
    theta = CoefficientVector.zeros(12)
    y = sample_observation(theta, NoiseModel(400, seed=3), stream=(0,))
    # Var of sqrt(n) y is 1; 4095 draws give SE about 0.022 on the variance.
    assert np.var(y.values * 20.0) == pytest.approx(1.0, abs=0.1)
    assert y == sample_observation(theta, NoiseModel(400, seed=3), stream=(0,))


@pytest.mark.parametrize("kwargs", [dict(n=1), dict(n=2.5), dict(n=10, seed=-1), dict(n=10, seed=2**64)])
def test_noise_model_validation(kwargs):
    with pytest.raises(ValueError):
        NoiseModel(**kwargs)


def test_hypercube_and_vertex_generators():
    h = hypercube_theta(4, 2, 0.5, signs=[True, False, True, False])
    assert h.level(2).tolist() == [0.5, -0.5, 0.5, -0.5]
    assert np.count_nonzero(h.values) == 4
    v = vertex_set_theta(3, 4, 0.25, signs=[1, -1, 1, 1])
    assert v.values.tolist() == [0.25, -0.25, 0.25, 0.25, 0, 0, 0]
    with pytest.raises(ValueError):
        vertex_set_theta(3, 8, 0.25)
    with pytest.raises(ValueError):
        hypercube_theta(3, 1, 0.1, signs=[1, 0])


@pytest.mark.parametrize("body", [BesovBody(0.5), BesovBody(1.0, 2, math.inf, 2.0), BesovBody(0.75, 3, 1, 0.5)])
def test_random_boundary_member_lies_on_boundary(body):
    theta = random_boundary_member(8, body, make_rng(11))
    assert besov_norm(theta, body) == pytest.approx(body.M, rel=1e-12)
