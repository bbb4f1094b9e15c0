import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from generators import DOMAINS, builtin_kernels, random_points, random_polynomial, random_self_map, trees
from rkhscert import kernel_core as kc
from rkhscert._json import ConfigError
from rkhscert.domain import DomainError, DomainTag, Point
from rkhscert.holomap import MobiusDisc, PolynomialFunc

DISC, BIDISC, BALL2 = DomainTag.disc(), DomainTag.polydisc(2), DomainTag.ball(2)


def direct(k, x, y):
    """Textbook closed forms, written independently of the library."""
    ip = np.vdot(y, x)  # sum x_i conj(y_i)
    if isinstance(k, kc.HardyDisc):
        return 1 / (1 - x[0] * np.conj(y[0]))
    if isinstance(k, kc.HardyPolydisc):
        return np.prod(1 / (1 - x * np.conj(y)))
    if isinstance(k, kc.HardyBall):
        return (1 - ip) ** (-k.n)
    if isinstance(k, kc.BergmanPolydisc):
        return np.prod((1 - x * np.conj(y)) ** (-(k.alpha + 2)))
    if isinstance(k, kc.BergmanBall):
        return (1 - ip) ** (-(k.n + 1 + k.alpha))
    if isinstance(k, kc.SeriesBergmanStar):
        out = 1.0
        for xi, yi in zip(x, y):
            out *= sum((s + 1) ** (1 + k.alpha) * (xi * np.conj(yi)) ** s for s in range(k.truncation + 1))
        return out
    raise TypeError(k)


@pytest.mark.parametrize("domain", DOMAINS, ids=str)
def test_builtins_match_closed_forms(domain):
    rng = np.random.default_rng(1)
    z = random_points(rng, domain, 6, 0.85).coords
    for k in builtin_kernels(domain):
        g = k.matrix(z)
        ref = np.array([[direct(k, x, y) for y in z] for x in z])
        assert np.allclose(g, ref, rtol=1e-10), k.name
        assert np.allclose(g, g.conj().T, rtol=1e-12)
        assert np.all(g.diagonal().real > 0)


def test_eval_kernel_on_points():
    k = kc.HardyBall(2)
    x, y = Point.of(BALL2, 0.5, 0), Point.of(BALL2, 0.5j, 0.1)
    assert np.isclose(k.at(x, y), 1 / (1 + 0.25j) ** 2)
    with pytest.raises(DomainError):
        k.at(Point.of(DISC, 0.1), Point.of(DISC, 0.1))


def test_boundary_singularity_is_reported():
    z = np.array([[1 - 1e-15]])
    with pytest.raises(kc.KernelEvaluationError):
        kc.HardyDisc().matrix(z)


def test_bergman_weight_must_exceed_minus_one():
    with pytest.raises(ValueError):
        kc.BergmanBall(2, -1.0)
    with pytest.raises(ValueError):
        kc.scale(-1, kc.HardyDisc())


def test_series_kernel_tail_bound():
    x = Point.of(BIDISC, 0.5, 0.3j)
    v = kc.series_bergman_star_eval(2, 0.0, 80, x, x)
    exact = np.prod([1 / (1 - t) ** 2 for t in (0.25, 0.09)])
    assert abs(v.value - exact) <= v.tail_bound + 1e-12
    assert v.tail_bound < 1e-20
    near = Point.of(BIDISC, 0.99, 0.0)
    with pytest.raises(kc.SeriesTruncationError):
        kc.series_bergman_star_eval(2, 0.0, 10, near, near)


@given(st.integers(1, 3), st.floats(-0.9, 3.0), st.floats(0.0, 0.8))
def test_series_tail_bound_is_valid(n, alpha, r):
    N = 40
    x = Point((r,) * n, DomainTag.polydisc(n))
    try:
        v = kc.series_bergman_star_eval(n, alpha, N, x, x)
    except kc.SeriesTruncationError:
        return
    long = kc.series_bergman_star_eval(n, alpha, 400, x, x).value
    assert abs(long - v.value) <= v.tail_bound * (1 + 1e-9) + 1e-12 * abs(long)


def test_pullback_is_kernel_at_images():
    phi = MobiusDisc(0.4 + 0.2j)
    z = random_points(np.random.default_rng(3), DISC, 8).coords
    k = kc.pullback(kc.HardyDisc(), phi)
    assert np.allclose(k.matrix(z), kc.HardyDisc().matrix(phi(z)), rtol=1e-12)


def test_weighted_pullback_and_rank_one():
    rng = np.random.default_rng(4)
    z = random_points(rng, BALL2, 7).coords
    phi = random_self_map(rng, BALL2)
    psi = random_polynomial(rng, BALL2)
    k = kc.weighted_pullback(kc.HardyBall(2), phi, psi)
    w = psi(z)
    assert np.allclose(k.matrix(z), np.outer(w, w.conj()) * kc.HardyBall(2).matrix(phi(z)), rtol=1e-10)
    r = kc.rank_one(psi).matrix(z)
    assert np.allclose(r, np.outer(w, w.conj()))
    assert kc.weighted_pullback(kc.HardyBall(2), phi).name == "pullback"


def test_combinators_check_domains():
    with pytest.raises(DomainError):
        kc.sum(kc.HardyDisc(), kc.HardyBall(2))
    with pytest.raises(DomainError):
        kc.pullback(kc.HardyBall(2), MobiusDisc(0.1))
    assert kc.sum(kc.HardyDisc(), kc.HardyBall(1)).domain.same_set(DISC)
    assert not kc.difference(kc.HardyDisc(), kc.HardyDisc()).psd


def test_operator_sugar():
    k = kc.HardyDisc()
    z = np.array([[0.1], [0.2j]])
    assert np.allclose((2 * k + k * k - k).matrix(z), k.matrix(z) + k.matrix(z) ** 2)


@given(trees())
def test_trees_are_hermitian(case):
    k, pts = case
    g = k.matrix(pts.coords)
    assert np.allclose(g, g.conj().T, rtol=1e-10, atol=1e-10 * np.max(np.abs(g)))
    assert np.allclose(k.pairwise(pts.coords), g.diagonal(), rtol=1e-12)


@given(trees())
def test_kernel_json_round_trip(case):
    k, pts = case
    text = json.dumps(k.to_json())
    again = kc.kernel_from_json(json.loads(text))
    assert json.dumps(again.to_json()) == text
    assert np.allclose(again.matrix(pts.coords), k.matrix(pts.coords), rtol=1e-12)


def test_kernel_json_errors():
    with pytest.raises(ConfigError) as info:
        kc.kernel_from_json({"node": "sum", "children": [{"node": "hardy_disc"}, {"node": "nope"}]})
    assert "$.children[1].node" in str(info.value)
    with pytest.raises(ConfigError) as info:
        kc.kernel_from_json({"node": "hardy_ball", "params": {}})
    assert "$.params" in str(info.value)
    with pytest.raises(ConfigError):
        kc.kernel_from_json({"node": "scale", "params": {"c": -2}, "children": [{"node": "hardy_disc"}]})
