"""Named operator presets and the gallery of worked examples.

Presets are ready-made :class:`OperatorSpec` objects for ``certify`` and
``oracle``. Gallery cases run a preset (or a positivity experiment) and
compare the outcome against the expectation table shipped in
``data/gallery_expectations.json``.
"""

from __future__ import annotations

import fnmatch
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Optional

import numpy as np

from . import kernel_core as kc
from .domain import DomainTag
from .holomap import (BallAutomorphism, ConstantMap, CoordinateWise, DiagonalEmbed, Identity, MobiusDisc,
                      PolynomialFunc, PolynomialMap, ScalarTimesIdentity)
from .norm_certifier import (Budget, _num, OperatorSpec, Tolerances, certify, lower_bound_bergman_star,
                             polydisc_ratio_squares, sufficient_condition_check)
from .psd_engine import psd_check, sample_points

DISC = DomainTag.disc()
BIDISC = DomainTag.polydisc(2)
BALL2 = DomainTag.ball(2)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    build: Callable[[], OperatorSpec]
    cap: Optional[float] = None  # boundary cap override for the sampling pool

    def budget(self, budget: Budget) -> Budget:
        return budget if self.cap is None else replace(budget, cap=self.cap)


def _hardy_disc(phi):
    return lambda: OperatorSpec(kc.HardyDisc(), kc.HardyDisc(), phi)


def _product_map_ball():
    # (z1, z2) -> (z1/2 + 0.1, z2^2 / 2) keeps the ball inside radius sqrt(0.61)
    return PolynomialMap([{(1, 0): 0.5, (0, 0): 0.1}, {(0, 2): 0.5}], BALL2, BALL2)


def _g_times_identity():
    return ScalarTimesIdentity(PolynomialFunc({(1, 0): 0.5, (0, 1): 0.5}, BALL2))


PRESETS = {p.name: p for p in [
    Preset("identity-disc", "identity on H^2(D)", _hardy_disc(Identity(DISC))),
    Preset("mobius-quarter", "disc automorphism a = 0.25 on H^2(D)", _hardy_disc(MobiusDisc(0.25))),
    Preset("mobius-half", "disc automorphism a = 0.5 on H^2(D)", _hardy_disc(MobiusDisc(0.5))),
    Preset("mobius-three-quarter", "disc automorphism a = 0.75 on H^2(D)", _hardy_disc(MobiusDisc(0.75))),
    Preset("constant-0.3", "constant map 0.3 on H^2(D)", _hardy_disc(ConstantMap((0.3,), DISC, DISC))),
    Preset("constant-0.6", "constant map 0.6 on H^2(D)", _hardy_disc(ConstantMap((0.6,), DISC, DISC))),
    Preset("constant-0.9", "constant map 0.9 on H^2(D)", _hardy_disc(ConstantMap((0.9,), DISC, DISC))),
    Preset("diagonal-d2", "(z1, z2) -> (z1, z1) on H^2(D^2); a known unbounded example",
           lambda: OperatorSpec(kc.HardyPolydisc(2), kc.HardyPolydisc(2), DiagonalEmbed())),
    Preset("polydisc-automorphism", "swapped Mobius factors a = (0.5, 0.3) on H^2(D^2)",
           lambda: OperatorSpec(kc.HardyPolydisc(2), kc.HardyPolydisc(2),
                                CoordinateWise([MobiusDisc(0.5), MobiusDisc(0.3, 1.0)], (1, 0)))),
    Preset("ball-automorphism", "ball automorphism a = (0.5, 0) on H^2(B_2)",
           lambda: OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), BallAutomorphism((0.5, 0)))),
    Preset("product-map-ball", "coordinate-wise self-map (z1/2 + 0.1, z2^2/2) on H^2(B_2)",
           lambda: OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), _product_map_ball())),
    Preset("g-times-identity-ball", "z -> g(z) z with g = (z1 + z2)/2 on H^2(B_2)",
           lambda: OperatorSpec(kc.HardyBall(2), kc.HardyBall(2), _g_times_identity())),
    Preset("cross-weight-ball", "A^2_0(B_2) -> A^2_1(B_2) under a ball automorphism",
           lambda: OperatorSpec(kc.BergmanBall(2, 0.0), kc.BergmanBall(2, 1.0), BallAutomorphism((0.5, 0)))),
    Preset("cross-weight-polydisc", "A^2_0(D^2) -> A^2_2(D^2) under (z1, z2) -> (z1, z1)",
           lambda: OperatorSpec(kc.BergmanPolydisc(2, 0.0), kc.BergmanPolydisc(2, 2.0), DiagonalEmbed())),
    Preset("disc-into-ball", "H^2(D) -> H^2(B_2) under z -> (z1 + z2)/2",
           lambda: OperatorSpec(kc.HardyDisc(), kc.HardyBall(2),
                                PolynomialMap([{(1, 0): 0.5, (0, 1): 0.5}], BALL2, DISC))),
    Preset("bergman-star-mobius", "disc automorphism a = 0.5 on the series-normed Bergman space",
           lambda: OperatorSpec(kc.SeriesBergmanStar(1, 0.0, 200), kc.SeriesBergmanStar(1, 0.0, 200),
                                MobiusDisc(0.5)), cap=0.1),
]}


def get_preset(name) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


# ---------------------------------------------------------------------------
# expectations


def load_expectations():
    text = resources.files("rkhscert").joinpath("data/gallery_expectations.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# gallery


@dataclass
class GalleryRow:
    name: str
    description: str
    verdict: str
    passed: bool
    lower_bounds: dict = field(default_factory=dict)
    upper_bounds: dict = field(default_factory=dict)
    failure: str = ""
    trace: tuple = ()

    def to_json(self):
        return {"name": self.name, "description": self.description, "verdict": self.verdict,
                "passed": self.passed, "failure": self.failure,
                "lower_bounds": {k: _num(v) for k, v in self.lower_bounds.items()},
                "upper_bounds": {k: _num(v) for k, v in self.upper_bounds.items()},
                "pencil_trace": [{"sample_size": m, "c_min": _num(c)} for m, c in self.trace]}


class _Checks:
    """Collects assertions; the first failure is kept for the summary."""

    def __init__(self):
        self.failure = ""

    def __call__(self, ok, message):
        if not ok and not self.failure:
            self.failure = message
        return ok


def _report_row(name, desc, report, chk, exp):
    allowed = exp.get("verdict")
    if allowed:
        chk(report.verdict in allowed, f"verdict {report.verdict} not in {allowed}")
    vals = [c for _, c in report.pencil_trace]
    chk(all(b >= a - 1e-8 * max(1.0, a) for a, b in zip(vals, vals[1:])), "pencil trace decreases")
    return GalleryRow(name, desc, report.verdict, not chk.failure,
                      {b.method: b.value for b in report.lower_bounds},
                      {b.method: b.value for b in report.upper_bounds},
                      chk.failure, tuple(report.pencil_trace))


def _run_preset(name, budget, tolerances):
    p = get_preset(name)
    return certify(p.build(), p.budget(budget), tolerances)


def _certify_case(preset_name, extra=None):
    """Gallery case that certifies a preset; ``extra(report, chk, exp)`` adds checks."""

    def run(name, desc, exp, budget, tolerances):
        report = _run_preset(preset_name, budget, tolerances)
        chk = _Checks()
        if extra is not None:
            extra(report, chk, exp)
        return _report_row(name, desc, report, chk, exp)

    return run


def _random_polynomial(rng, domain, degree=2, radius=0.95):
    """Random polynomial with sum |coeff| * max|monomial| <= radius, so |psi| < 1 on the domain."""
    n = domain.dimension
    exps = [e for e in np.ndindex(*([degree + 1] * n)) if sum(e) <= degree]
    c = rng.normal(size=len(exps)) + 1j * rng.normal(size=len(exps))
    c *= radius / np.sum(np.abs(c))
    return PolynomialFunc({tuple(int(v) for v in e): complex(v) for e, v in zip(exps, c)}, domain)


def multiplier_kernel(psi, base: kc.KernelExpr, c=1.0) -> kc.KernelExpr:
    """(c^2 - psi(z) conj(psi(w))) K(z, w): a kernel whenever |psi| <= c."""
    return kc.difference(kc.scale(c * c, base), kc.product(kc.rank_one(psi), base))


def _multiplier_case(domain, base):
    def run(name, desc, exp, budget, tolerances):
        rng = np.random.default_rng(budget.seed)
        chk = _Checks()
        worst = math.inf
        for i in range(int(exp.get("functions", 20))):
            psi = _random_polynomial(rng, domain)
            pts = sample_points(domain, "uniform_random", int(exp.get("points", 50)), seed=budget.seed + i)
            v = psd_check(multiplier_kernel(psi, base), pts, tolerances.psd_tol)
            worst = min(worst, v.min_eigenvalue / v.scale)
            chk(v.verdict == "psd", f"function {i}: verdict {v.verdict}")
        return GalleryRow(name, desc, "psd" if not chk.failure else "not_psd", not chk.failure,
                          {"min_relative_eigenvalue": worst}, {}, chk.failure)

    return run


def _upper_value(exp_key):
    def extra(report, chk, exp):
        bound = exp[exp_key]
        chk(report.c_min <= bound + exp.get("slack", 1e-6), f"c_min {report.c_min:.10g} exceeds {bound:.10g}")
    return extra


def _disc_automorphism(report, chk, exp):
    a = exp["a"]
    coarse = math.sqrt((1 + a) / (1 - a))
    chk(abs(report.upper("disc_automorphism_coarse") - coarse) <= 1e-12, "coarse bound mismatch")
    chk(report.c_min <= coarse + 1e-6, "pencil exceeds the automorphism bound")
    chk(report.c_min >= (1 - exp.get("rel", 0.02)) * coarse, "pencil not within tolerance of the bound")


def _disc_into_ball(report, chk, exp):
    chk(report.checks.get("eta_psd") == "psd", "quotient kernel not psd")
    bound = report.upper("kernel_quotient_multiplier")
    chk(bound is not None and math.isfinite(bound), "no finite quotient bound")
    if bound is not None:
        chk(report.c_min <= bound + 1e-6, "pencil exceeds the quotient bound")


def _sufficient_psd(report, chk, exp):
    chk(report.checks.get("sufficient_condition") == "psd", "sufficient condition not psd")
    bound = exp["norm_bound"]
    chk(report.c_min <= bound + 1e-6, f"c_min {report.c_min:.10g} exceeds {bound:.10g}")


def _unbounded(report, chk, exp):
    chk(report.c_min > exp.get("threshold", 1e3), f"c_min {report.c_min:.6g} below the threshold")
    chk(report.checks.get("sufficient_condition") == "not_psd", "no not_psd witness for the sufficient condition")


def _constant(report, chk, exp):
    a = exp["a"]
    exact = 1 / math.sqrt(1 - a * a)
    for m in ("pencil", "kernel_ratio", "kernel_section_ratio", "oracle_truncation_norm"):
        v = report.lower(m)
        chk(v is not None and abs(v - exact) <= exp.get("rel", 0.005) * exact, f"{m} not within tolerance")
    chk(report.upper("disc_automorphism_coarse") > exact, "coarse bound does not exceed the norm")


def _origin_ratio(name, desc, exp, budget, tolerances):
    chk = _Checks()
    lows, ups = {}, {}
    for i, case in enumerate(exp["cases"]):
        p = get_preset(case["preset"])
        spec = p.build()
        report = certify(spec, p.budget(budget), tolerances)
        w = spec.map(np.zeros((1, spec.domain.dimension)))[0]
        n = spec.domain.dimension
        expected = (1 - float(np.sum(np.abs(w) ** 2))) ** (-n / 2)
        got = report.lower("kernel_ratio_at_origin")
        lows[case["preset"]] = got
        ups[case["preset"]] = expected
        chk(abs(got - expected) <= 1e-10 * expected, f"{case['preset']}: origin ratio {got!r} != {expected!r}")
        chk(report.c_min >= expected - 1e-8, f"{case['preset']}: pencil below the origin ratio")
    return GalleryRow(name, desc, "pass" if not chk.failure else "fail", not chk.failure, lows, ups, chk.failure)


def _ratio_chain(name, desc, exp, budget, tolerances):
    from .norm_certifier import certification_pool
    p = get_preset(exp["preset"])
    spec = p.build()
    report = certify(spec, p.budget(budget), tolerances)
    chk = _Checks()
    pts = certification_pool(spec.domain, report.pencil_trace[-1][0], budget.seed, p.budget(budget).cap)
    best = float(np.max(polydisc_ratio_squares(spec.map, pts)))
    chk(best <= report.c_min ** 2 + 1e-6, f"coordinate ratio {best:.10g} exceeds c_min^2 {report.c_min ** 2:.10g}")
    row = _report_row(name, desc, report, chk, exp)
    row.lower_bounds["coordinate_ratio_squared"] = best
    return row


def _bergman_star(report, chk, exp):
    v = report.lower("bergman_star_ratio")
    chk(v is not None and v <= report.c_min + 1e-6, "series ratio exceeds the pencil")
    from .psd_engine import PointSet
    origin = PointSet(np.zeros((1, 1)), DISC, "origin")
    at0 = lower_bound_bergman_star(MobiusDisc(0.5), 0.0, origin, 200)
    chk(abs(at0 - 16 / 9) <= 1e-10, f"series ratio at the origin {at0!r} != 16/9")


@dataclass(frozen=True)
class GalleryCase:
    name: str
    description: str
    run: Callable


CASES = [
    GalleryCase("multiplier-kernel-polydisc",
                "(1 - psi(z) conj(psi(w))) times the Hardy kernel of D^2 is a kernel for |psi| < 1",
                _multiplier_case(BIDISC, kc.HardyPolydisc(2))),
    GalleryCase("multiplier-kernel-ball",
                "(1 - psi(z) conj(psi(w))) / (1 - <z, w>)^2 is a kernel on B_2 for |psi| < 1",
                _multiplier_case(BALL2, kc.HardyBall(2))),
    GalleryCase("product-map-ball", "coordinate-wise self-maps of B_2 are bounded on H^2(B_2)",
                _certify_case("product-map-ball")),
    GalleryCase("g-times-identity-ball", "z -> g(z) z has norm one on H^2(B_2)",
                _certify_case("g-times-identity-ball", _upper_value("c_max"))),
    GalleryCase("cross-weight-ball", "A^2_alpha(B_n) -> A^2_beta(B_n) with beta = n + alpha - 1 is bounded",
                _certify_case("cross-weight-ball")),
    GalleryCase("cross-weight-polydisc", "A^2_alpha(D^n) -> A^2_beta(D^n) with beta = n(2 + alpha) - 2 is bounded",
                _certify_case("cross-weight-polydisc")),
    GalleryCase("disc-automorphism-bound", "pencil meets sqrt((1+|phi(0)|)/(1-|phi(0)|)) for a disc automorphism",
                _certify_case("mobius-half", _disc_automorphism)),
    GalleryCase("constant-exact", "constant maps attain 1/sqrt(1 - |a|^2); the coarse bound is not tight",
                _certify_case("constant-0.6", _constant)),
    GalleryCase("disc-into-ball", "H^2(D) -> H^2(B_n) composition is bounded via the kernel quotient",
                _certify_case("disc-into-ball", _disc_into_ball)),
    GalleryCase("polydisc-automorphism", "the product kernel quotient is psd for coordinate-wise automorphisms",
                _certify_case("polydisc-automorphism", _sufficient_psd)),
    GalleryCase("ball-automorphism", "the ball kernel quotient factors as a rank-one kernel for automorphisms",
                _certify_case("ball-automorphism", _sufficient_psd)),
    GalleryCase("origin-ratio-ball", "kernel ratio at the origin equals (1 - |phi(0)|^2)^(-n/2) on H^2(B_n)",
                _origin_ratio),
    GalleryCase("polydisc-ratio-chain", "prod (1-|z_i|^2)/(1-|phi_i(z)|^2) stays below c_min^2", _ratio_chain),
    GalleryCase("bergman-star-mobius", "series-normed Bergman ratio lower bound sits below the pencil",
                _certify_case("bergman-star-mobius", _bergman_star)),
    GalleryCase("diagonal-unbounded", "pencil divergence and a failed sufficient condition for (z1, z1)",
                _certify_case("diagonal-d2", _unbounded)),
]


def select(pattern: Optional[str]):
    if not pattern:
        return list(CASES)
    glob = any(ch in pattern for ch in "*?[")
    return [c for c in CASES if (fnmatch.fnmatch(c.name, pattern) if glob else pattern in c.name)]


def run_case(case: GalleryCase, budget: Budget, tolerances: Tolerances, expectations=None) -> GalleryRow:
    exp = (expectations or load_expectations())["cases"].get(case.name, {})
    try:
        return case.run(case.name, case.description, exp, budget, tolerances)
    except Exception as exc:  # a failing preset becomes a failed row, not a crash
        return GalleryRow(case.name, case.description, "error", False, failure=f"{type(exc).__name__}: {exc}")


def run_gallery(pattern=None, budget: Budget = Budget(), tolerances: Tolerances = Tolerances(), executor=None):
    """Run the selected cases; pass a ``concurrent.futures`` executor to run them in parallel."""
    expectations = load_expectations()
    cases = select(pattern)
    mapper = executor.map if executor is not None else map
    return list(mapper(lambda c: run_case(c, budget, tolerances, expectations), cases))
