import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from generators import random_disc_map, random_points, random_polynomial, seeds
from rkhscert import kernel_core as kc
from rkhscert._json import ConfigError
from rkhscert.domain import DomainError, DomainTag
from rkhscert.holomap import (BallAutomorphism, ConstantMap, CoordinateWise, DiagonalEmbed, Identity, MobiusDisc,
                              PolynomialFunc)
from rkhscert.norm_certifier import (Budget, CertificateReport, DegeneratePointsError, InconsistentReportError,
                                     LowerBound, OperatorSpec, Tolerances, UpperBound, certification_pool, certify,
                                     check_consistency, check_difference, classify_trace, genbdd_upper,
                                     inclusion_bound, lower_bound_bergman_star, lower_bound_kernel_ratio,
                                     membership_norm_lower, pencil_cmin, polydisc_ratio_squares, refined_sup,
                                     sufficient_condition_check, upper_bound_hardy_disc)
from rkhscert.psd_engine import PointSet, sample_points

DISC, BIDISC, BALL2 = DomainTag.disc(), DomainTag.polydisc(2), DomainTag.ball(2)
FAST = Budget(stages=(10, 20, 40, 80), oracle_schedule=(20, 40))


def hardy(phi):
    return OperatorSpec(kc.HardyDisc(), kc.HardyDisc(), phi)


def test_spec_domain_checks_and_json():
    with pytest.raises(DomainError):
        OperatorSpec(kc.HardyDisc(), kc.HardyBall(2), MobiusDisc(0.1))
    spec = OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), BallAutomorphism((0.5, 0)),
                        PolynomialFunc({(0, 0): 1.0}, BALL2))
    again = OperatorSpec.from_json(json.loads(json.dumps(spec.to_json())))
    assert again.to_json() == spec.to_json()
    with pytest.raises(ConfigError) as info:
        OperatorSpec.from_json({"source_kernel": {"node": "hardy_disc"}, "target_kernel": {"node": "hardy_disc"},
                                "map": {"map": "ball_automorphism", "params": {"a": [[0.1, 0], [0, 0]]}}})
    assert str(info.value).startswith("$")


def test_identity_has_norm_one():
    pts = sample_points(DISC, "boundary_biased", 60, seed=0)
    assert pencil_cmin(hardy(Identity(DISC)), pts) == pytest.approx(1, abs=1e-9)


@given(seeds, st.integers(5, 40))
def test_pencil_is_monotone_on_nested_prefixes(seed, m):
    rng = np.random.default_rng(seed)
    phi = random_disc_map(rng)
    pts = random_points(rng, DISC, m + 10, 0.97)
    spec = hardy(phi)
    assert pencil_cmin(spec, pts.prefix(m)) <= pencil_cmin(spec, pts) * (1 + 1e-9)


@given(seeds)
def test_pencil_value_passes_positivity_replay(seed):
    rng = np.random.default_rng(seed)
    spec = hardy(random_disc_map(rng))
    pts = random_points(rng, DISC, 25, 0.95)
    c = pencil_cmin(spec, pts, verify=True)
    assert check_difference(spec, pts, c * 1.000001).verdict == "psd"
    # well below c the difference kernel must fail
    assert check_difference(spec, pts, 0.5 * c).verdict == "not_psd"


@given(seeds)
def test_pencil_never_exceeds_the_automorphism_bound(seed):
    rng = np.random.default_rng(seed)
    a = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.5, 0.5))
    phi = MobiusDisc(a, float(rng.uniform(0, 6)))
    pts = sample_points(DISC, "boundary_biased", 60, seed=seed % 1000)
    coarse, refined = upper_bound_hardy_disc(phi)
    assert pencil_cmin(hardy(phi), pts) <= coarse + 1e-6
    assert refined <= coarse + 1e-9


def test_weighted_operator_and_multiplier():
    # W f = psi * f with |psi| < 1 is a contraction on H^2
    psi = PolynomialFunc({(1,): 0.5, (0,): 0.3}, DISC)
    spec = OperatorSpec(kc.HardyDisc(), kc.HardyDisc(), Identity(DISC), psi)
    pts = sample_points(DISC, "boundary_biased", 80, seed=1)
    c = pencil_cmin(spec, pts)
    assert 0.7 < c <= 0.8 + 1e-9


def test_degenerate_points_are_reported():
    spec = hardy(Identity(DISC))
    pts = PointSet(np.array([[0.3], [0.3 + 2e-10]]), DISC, "twins")
    with pytest.raises(DegeneratePointsError):
        pencil_cmin(spec, pts, ridge=0.0)
    with pytest.raises(ValueError):
        pencil_cmin(spec, pts, ridge=-1)


def test_inclusion_and_membership():
    pts = sample_points(DISC, "uniform_random", 60, seed=0)
    # H^2 sits contractively inside the Bergman space A^2_0
    assert inclusion_bound(kc.HardyDisc(), kc.BergmanPolydisc(1, 0.0), pts) <= 1 + 1e-9
    # ||z^3||_{H^2} = 1, approached from below
    f = PolynomialFunc({(3,): 1.0}, DISC)
    v = membership_norm_lower(kc.HardyDisc(), f, pts)
    assert 0.99 < v <= 1 + 1e-9


def test_kernel_ratio_lower_bounds():
    spec = OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), BallAutomorphism((0.5, 0)))
    origin = PointSet(np.zeros((1, 2)), BALL2, "origin")
    assert lower_bound_kernel_ratio(spec, origin) == pytest.approx(4 / 3, abs=1e-12)
    pts = certification_pool(BALL2, 200, 0)
    assert lower_bound_kernel_ratio(spec, pts) <= pencil_cmin(spec, pts) + 1e-9


def test_constant_map_ratio_is_exact():
    spec = hardy(ConstantMap((0.6,), DISC, DISC))
    pts = PointSet(np.zeros((1, 1)), DISC)
    assert lower_bound_kernel_ratio(spec, pts) == pytest.approx(1.25, abs=1e-12)


def test_polydisc_ratio_chain():
    phi = CoordinateWise([MobiusDisc(0.5), MobiusDisc(0.3, 1.0)], (1, 0))
    spec = OperatorSpec(kc.HardyPolydisc(2), kc.HardyPolydisc(2), phi)
    pts = certification_pool(BIDISC, 200, 3)
    assert np.max(polydisc_ratio_squares(phi, pts)) <= pencil_cmin(spec, pts) ** 2 + 1e-6


def test_sufficient_condition():
    pts = certification_pool(BIDISC, 60, 0)
    bounded = OperatorSpec(kc.HardyPolydisc(2), kc.HardyPolydisc(2),
                           CoordinateWise([MobiusDisc(0.5), MobiusDisc(0.3)]))
    assert sufficient_condition_check(bounded, pts).verdict == "psd"
    diag = OperatorSpec(kc.HardyPolydisc(2), kc.HardyPolydisc(2), DiagonalEmbed())
    assert sufficient_condition_check(diag, pts).verdict == "not_psd"
    with pytest.raises(ValueError):
        sufficient_condition_check(OperatorSpec(kc.BergmanBall(2, 0), kc.BergmanBall(2, 0), Identity(BALL2)), pts)


def test_genbdd_on_automorphisms_and_vanishing_eta():
    spec = OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), BallAutomorphism((0.5, 0)))
    pts = certification_pool(BALL2, 80, 0)
    g = genbdd_upper(spec, pts)
    assert g.eta_psd.verdict == "psd" and g.bound is not None
    assert g.eta00 == pytest.approx(0.75 ** 2)
    assert g.bound >= pencil_cmin(spec, pts) - 1e-6
    fixed = genbdd_upper(spec, pts, multiplier_norm_estimate=2.0)
    assert fixed.bound == pytest.approx(0.75 * 2.0) and fixed.caveat == "user-supplied"
    with pytest.raises(ValueError):
        genbdd_upper(OperatorSpec(spec.source_kernel, spec.target_kernel, spec.map,
                                  PolynomialFunc({(0, 0): 1.0}, BALL2)), pts)


def test_refined_sup_finds_the_boundary_peak():
    f = lambda z: 1 / (1.2 - z[:, 0])  # noqa: E731, peak 5 at z = 1
    z = sample_points(DISC, "uniform_random", 30, seed=0).coords
    assert refined_sup(f, DISC, z, cap=1e-8) == pytest.approx(5.0, rel=1e-6)


def test_bergman_star_ratio():
    origin = PointSet(np.zeros((1, 1)), DISC)
    assert lower_bound_bergman_star(MobiusDisc(0.5), 0.0, origin, 200) == pytest.approx(16 / 9, abs=1e-10)
    with pytest.raises(kc.SeriesTruncationError):
        lower_bound_bergman_star(MobiusDisc(0.5), 0.0, PointSet(np.array([[0.999]]), DISC), 20)
    with pytest.raises(ValueError):
        lower_bound_bergman_star(MobiusDisc(0.5), -1.0, origin)


def test_classify_trace():
    tol = Tolerances()
    assert classify_trace([1.0, 1.0, 1.0], tol) == "bounded_evidence"
    assert classify_trace([1.0, 2.0, 5000.0], tol) == "unbounded_evidence"
    assert classify_trace([1.0, 2.0, 4.0], tol) == "unbounded_evidence"
    assert classify_trace([1.0, 1.1, 1.2], tol) == "inconclusive"
    assert classify_trace([1.0, 1.1], tol) == "inconclusive"


def test_pool_prefixes_are_stable():
    a = certification_pool(BALL2, 100, 7)
    b = certification_pool(BALL2, 100, 7)
    assert np.array_equal(a.coords, b.coords)
    assert np.all(a.coords[0] == 0)
    assert np.all(BALL2.slack(a.coords) > 0)


def test_certify_small_budget():
    r = certify(hardy(MobiusDisc(0.5)), FAST)
    assert r.verdict in ("bounded_evidence", "inconclusive")
    vals = [c for _, c in r.pencil_trace]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    assert r.upper("disc_automorphism_coarse") == pytest.approx(math.sqrt(3))
    assert r.lower("oracle_truncation_norm") <= math.sqrt(3)
    assert r.lower("kernel_ratio_at_origin") == pytest.approx(2 / math.sqrt(3))
    doc = json.loads(r.dumps())
    assert doc["pencil_trace"][0]["sample_size"] == 10
    assert r.c_min == vals[-1]


def test_certify_is_deterministic():
    spec = OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), BallAutomorphism((0.5, 0)))
    assert certify(spec, FAST).dumps() == certify(spec, FAST).dumps()


def test_certify_max_points():
    with pytest.raises(ValueError):
        certify(hardy(Identity(DISC)), Budget(stages=(10, 20), max_points=5))
    with pytest.raises(ValueError):
        Budget(stages=(20, 10))


def test_inconsistent_report_is_rejected():
    r = CertificateReport((LowerBound("pencil", 2.0, 10),), (UpperBound("exact", 1.0, ""),),
                          ((10, 2.0),), "bounded_evidence", 0, Tolerances())
    with pytest.raises(InconsistentReportError):
        check_consistency(r)
    caveated = CertificateReport((LowerBound("pencil", 2.0, 10),), (UpperBound("sampled", 1.0, "sampled"),),
                                 ((10, 2.0),), "bounded_evidence", 0, Tolerances())
    check_consistency(caveated)


def test_report_nonfinite_values_become_null(tmp_path):
    r = CertificateReport((LowerBound("pencil", float("inf"), 10),), (UpperBound("x", None, "c"),),
                          ((10, float("nan")),), "inconclusive", 0, Tolerances())
    doc = json.loads(r.dumps())
    assert doc["lower_bounds"][0]["value"] is None and doc["pencil_trace"][0]["c_min"] is None
    r.trace_to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "sample_size,c_min"
