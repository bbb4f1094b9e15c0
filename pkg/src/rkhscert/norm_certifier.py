"""Norm bounds for weighted composition operators W f = psi * (f o phi).

The workhorse is a generalized eigenvalue problem: on a finite point set,
||W|| <= c forces c^2 B - A to be positive semidefinite, where B is the Gram
matrix of the target kernel and A that of psi(x) conj(psi(y)) K1(phi(x), phi(y)).
The smallest such c on the sample (``pencil_cmin``) is therefore a lower bound
for ||W|| that can only grow as points are added. Closed-form upper and lower
bounds for the Hardy and Bergman settings are attached to every report so the
numbers can be checked against each other.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from . import kernel_core as kc
from . import matrix_oracle
from ._json import ConfigError, require
from .domain import DomainError, DomainTag, one_minus_inner
from .holomap import HoloFunc, HoloMap, Identity, func_from_json, map_from_json
from .kernel_core import KernelExpr
from .psd_engine import (BOUNDARY_CAP, DEFAULT_PSD_TOL, HermitianMatrix, PointSet, PsdVerdict, gram, psd_check,
                         psd_verdict, sample_points)

DEFAULT_RIDGE = 1e-12
DEFAULT_STAGES = (25, 50, 100, 200, 400, 800)
DIVERGENCE_THRESHOLD = 1e3
GROWTH_RATIO = 1.5
PLATEAU = 0.01
SANDWICH_SLACK = 1e-6
VERIFY_MARGIN = 1e-6
ETA0_FLOOR = 1e-12

SAMPLED_SUP = "sampled sup (lower estimate of the true sup-norm expression)"
MULTIPLIER_PROXY = ("sup-norm equals the multiplier norm on H^2(D) only; "
                    "elsewhere this is a heuristic proxy; sampled sup (lower estimate)")
MULTIPLIER_USER = "user-supplied"
HEURISTIC_NOTE = ("verdicts are heuristics on finite samples: divergence threshold and growth "
                  "ratio flag unboundedness, a plateau flags boundedness; neither is a proof")


class DegeneratePointsError(np.linalg.LinAlgError):
    pass


class InconsistentReportError(AssertionError):
    pass


# ---------------------------------------------------------------------------
# operator description


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """W = psi * (. o phi) from H(K1) on X1 to H(K2) on X2, with phi: X2 -> X1."""

    source_kernel: KernelExpr
    target_kernel: KernelExpr
    map: HoloMap
    weight: Optional[HoloFunc] = None

    def __post_init__(self):
        if not self.map.source.same_set(self.target_kernel.domain):
            raise DomainError(f"map starts on {self.map.source} but the target kernel lives on "
                              f"{self.target_kernel.domain}")
        if not self.map.target.same_set(self.source_kernel.domain):
            raise DomainError(f"map lands in {self.map.target} but the source kernel lives on "
                              f"{self.source_kernel.domain}")
        if self.weight is not None and not self.weight.domain.same_set(self.map.source):
            raise DomainError(f"weight lives on {self.weight.domain}, map starts on {self.map.source}")

    @property
    def domain(self) -> DomainTag:
        return self.target_kernel.domain

    @property
    def pulled_back(self) -> KernelExpr:
        return kc.weighted_pullback(self.source_kernel, self.map, self.weight)

    def to_json(self):
        return {"source_kernel": self.source_kernel.to_json(),
                "target_kernel": self.target_kernel.to_json(),
                "map": self.map.to_json(),
                "weight": None if self.weight is None else self.weight.to_json()}

    @classmethod
    def from_json(cls, obj, path="$"):
        w = obj.get("weight") if isinstance(obj, dict) else None
        try:
            return cls(kc.kernel_from_json(require(obj, "source_kernel", path), f"{path}.source_kernel"),
                       kc.kernel_from_json(require(obj, "target_kernel", path), f"{path}.target_kernel"),
                       map_from_json(require(obj, "map", path), f"{path}.map"),
                       None if w is None else func_from_json(w, f"{path}.weight"))
        except DomainError as exc:
            raise ConfigError(str(exc), path) from exc


# ---------------------------------------------------------------------------
# the pencil


def _pencil_lambda(a, b, ridge):
    """Largest eigenvalue of the pencil (A, B + ridge * diag(B)).

    Rows and columns are first scaled by diag(B)^(-1/2), so the ridge is
    relative to each point's own kernel diagonal. Because the scaling and the
    ridge are per point, the pencil on a subset of points is exactly the
    principal sub-pencil of the pencil on the full set.
    """
    d = np.real(np.diagonal(b))
    if not np.all(d > 0):
        raise DegeneratePointsError("target kernel has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    bt = s[:, None] * b * s[None, :]
    bt = (bt + bt.conj().T) / 2
    bt[np.diag_indices_from(bt)] += ridge
    at = s[:, None] * a * s[None, :]
    at = (at + at.conj().T) / 2
    try:
        low = scipy.linalg.cholesky(bt, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePointsError(f"target Gram matrix is not positive definite even with "
                                    f"ridge {ridge:g}; duplicate or degenerate points") from exc
    x = scipy.linalg.solve_triangular(low, at, lower=True)
    w = scipy.linalg.solve_triangular(low, x.conj().T, lower=True)
    w = (w + w.conj().T) / 2
    n = w.shape[0]
    try:
        top = scipy.linalg.eigh(w, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    except np.linalg.LinAlgError as exc:
        raise DegeneratePointsError(f"pencil eigensolve failed: {exc}") from exc
    return float(top[0])


def _grams(spec: OperatorSpec, pts: PointSet):
    if not pts.domain.same_set(spec.domain):
        raise DomainError(f"points on {pts.domain}, operator acts on functions over {spec.domain}")
    return gram(spec.pulled_back, pts).entries, gram(spec.target_kernel, pts).entries


def pencil_cmin(spec: OperatorSpec, pts: PointSet, ridge=DEFAULT_RIDGE, verify=False) -> float:
    """Smallest c with c^2 B - A positive semidefinite on ``pts`` (ridge-regularized).

    The ridge only shrinks the pencil's top eigenvalue, so the result stays a
    valid lower bound for the operator norm. With ``verify=True`` the
    difference kernel at c^2 (1 + 1e-6) is re-checked for positivity.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    a, b = _grams(spec, pts)
    c = math.sqrt(max(_pencil_lambda(a, b, ridge), 0.0))
    if verify:
        v = check_difference(spec, pts, c * math.sqrt(1 + VERIFY_MARGIN))
        if v.verdict != "psd":
            raise InconsistentReportError(
                f"c_min {c:.12g} fails the positivity replay on {pts.label!r} "
                f"(min eigenvalue {v.min_eigenvalue:.3g}, scale {v.scale:.3g})")
    return c


def check_difference(spec: OperatorSpec, pts: PointSet, c: float, tolerance=DEFAULT_PSD_TOL) -> PsdVerdict:
    """PSD verdict for c^2 K2(x, y) - psi(x) conj(psi(y)) K1(phi(x), phi(y)) on ``pts``."""
    k = kc.difference(kc.scale(c * c, spec.target_kernel), spec.pulled_back)
    return psd_check(k, pts, tolerance)


def inclusion_bound(k1: KernelExpr, k2: KernelExpr, pts: PointSet, ridge=DEFAULT_RIDGE) -> float:
    """Lower bound for the norm of the inclusion H(K1) into H(K2)."""
    if not k1.domain.same_set(k2.domain):
        raise DomainError(f"kernels live on {k1.domain} and {k2.domain}")
    return pencil_cmin(OperatorSpec(k1, k2, Identity(k2.domain)), pts, ridge)


def membership_norm_lower(k: KernelExpr, f: HoloFunc, pts: PointSet, ridge=DEFAULT_RIDGE) -> float:
    """sqrt(v* B^-1 v) with v = f(pts): a lower bound for ||f|| in H(K), monotone in pts."""
    if not pts.domain.same_set(k.domain):
        raise DomainError(f"points on {pts.domain}, kernel on {k.domain}")
    b = gram(k, pts).entries
    v = f(pts.coords)
    d = np.real(np.diagonal(b))
    if not np.all(d > 0):
        raise DegeneratePointsError("kernel has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    bt = s[:, None] * b * s[None, :]
    bt = (bt + bt.conj().T) / 2
    bt[np.diag_indices_from(bt)] += ridge
    try:
        cf = scipy.linalg.cho_factor(bt, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePointsError("Gram matrix not positive definite even with ridge") from exc
    vt = s * v
    return float(math.sqrt(max(np.vdot(vt, scipy.linalg.cho_solve(cf, vt)).real, 0.0)))


# ---------------------------------------------------------------------------
# closed-form bounds


def _is_hardy_disc(k):
    if isinstance(k, kc.HardyDisc):
        return True
    return isinstance(k, (kc.HardyPolydisc, kc.HardyBall)) and k.n == 1


def _hardy_kind(k):
    """('polydisc', n) or ('ball', n) for the plain Hardy builtins, else None."""
    if isinstance(k, kc.HardyDisc):
        return ("polydisc", 1)
    if isinstance(k, kc.HardyPolydisc):
        return ("polydisc", k.n)
    if isinstance(k, kc.HardyBall):
        return ("ball", k.n) if k.n > 1 else ("polydisc", 1)
    return None


def _origin(domain):
    return np.zeros((1, domain.dimension), dtype=complex)


def upper_bound_hardy_disc(phi: HoloMap, boundary_samples=2048, interior_samples=512):
    """(coarse, refined) upper bounds for ||C_phi|| on H^2(D).

    coarse = sqrt((1+|p|)/(1-|p|)) with p = phi(0); refined is the sampled
    sup of sqrt(1-|p|^2)/|1 - conj(p) phi(z)| over the circle of radius 0.999
    and an interior grid.
    """
    if not (phi.source.same_set(DomainTag.disc()) and phi.target.same_set(DomainTag.disc())):
        raise DomainError("the disc bound needs a self-map of the disc")
    p = complex(phi(_origin(phi.source))[0, 0])
    r = abs(p)
    coarse = math.sqrt((1 + r) / (1 - r))
    t = 2 * np.pi * np.arange(boundary_samples) / boundary_samples
    ring = 0.999 * np.exp(1j * t)
    inner = sample_points(phi.source, "grid", interior_samples).coords[:, 0]
    z = np.concatenate([ring, inner])[:, None]
    w = phi(z)[:, 0]
    refined = float(np.max(math.sqrt(1 - r * r) / np.abs(1 - np.conj(p) * w)))
    return coarse, refined


@dataclass(frozen=True)
class GenbddResult:
    bound: Optional[float]
    eta_psd: PsdVerdict
    caveat: str
    eta00: float
    multiplier_norm: float


def _eta_matrix(spec, pts):
    a, b = _grams(spec, pts)
    small = ~(np.abs(a) > np.finfo(float).tiny)
    if np.any(small):
        i, j = (int(v) for v in np.argwhere(small)[0])
        raise kc.KernelEvaluationError(f"K1(phi(x), phi(y)) vanishes at pair ({i}, {j}) of {pts.label!r}")
    return b / a


def _inverse_eta0(spec, z):
    o = _origin(spec.domain)
    num = spec.source_kernel.matrix(spec.map(z), spec.map(o))[:, 0]
    den = spec.target_kernel.matrix(z, o)[:, 0]
    eta0 = den / num
    if np.any(np.abs(eta0) < ETA0_FLOOR):
        i = int(np.argmin(np.abs(eta0)))
        raise kc.KernelEvaluationError(f"|eta_0| below {ETA0_FLOOR:g} at sample {i}: 1/eta_0 looks unbounded")
    return 1.0 / eta0


def sup_samples(domain: DomainTag, size: int, seed=0, cap=BOUNDARY_CAP) -> np.ndarray:
    """Points for sampled sup-norms: boundary-biased radii in every coordinate.

    On the polydisc all coordinates approach the circle at once, so products
    over coordinates reach their sup on the distinguished boundary.
    """
    if domain.kind == "ball" and domain.dimension > 1:
        return sample_points(domain, "boundary_biased", size, seed=seed, cap=cap).coords
    cols = [sample_points(DomainTag.disc(), "boundary_biased", size, seed=seed + i, cap=cap).coords[:, 0]
            for i in range(domain.dimension)]
    return np.stack(cols, axis=-1)


def _boundary_point(domain, params, radius):
    n = domain.dimension
    if domain.kind == "ball" and n > 1:
        v = params[:n] + 1j * params[n:]
        return radius * v / np.linalg.norm(v)
    return radius * np.exp(1j * params)


def refined_sup(f, domain: DomainTag, z: np.ndarray, cap=BOUNDARY_CAP, starts=4) -> float:
    """max |f| over ``z``, polished by Nelder-Mead on the sphere (or torus) of radius 1 - cap.

    ``f`` maps an (m, n) array to m values. Holomorphic moduli peak at the
    boundary, so the best sampled points seed a local search there. The
    result is still a lower estimate of the sup.
    """
    vals = np.abs(f(z))
    best = float(np.max(vals))
    radius = 1 - cap
    ball = domain.kind == "ball" and domain.dimension > 1
    for i in np.argsort(vals)[::-1][:starts]:
        z0 = z[i]
        x0 = np.concatenate([z0.real, z0.imag]) if ball else np.angle(z0)
        if ball and not np.linalg.norm(x0):
            continue

        def neg(params):
            return -float(np.abs(f(_boundary_point(domain, params, radius)[None, :]))[0])

        res = scipy.optimize.minimize(neg, x0, method="Nelder-Mead",
                                      options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
        best = max(best, -float(res.fun))
    return best


def genbdd_upper(spec: OperatorSpec, pts: PointSet, multiplier_norm_estimate="auto",
                 tolerance=DEFAULT_PSD_TOL, extras=2000, seed=0, cap=BOUNDARY_CAP) -> GenbddResult:
    """sqrt(eta(0,0)) * ||M_{1/eta_0}|| with eta = K2 / K1(phi, phi).

    The bound is only meaningful when eta is itself a kernel; its Gram matrix
    on ``pts`` is checked and the bound is withheld (None) unless it is psd.
    """
    if spec.weight is not None:
        raise ValueError("this bound applies to unweighted composition operators")
    eta = _eta_matrix(spec, pts)
    verdict = psd_verdict(HermitianMatrix.from_array(eta), tolerance)
    o = _origin(spec.domain)
    eta00 = float((spec.target_kernel.matrix(o)[0, 0]
                   / spec.source_kernel.matrix(spec.map(o))[0, 0]).real)
    if multiplier_norm_estimate == "auto":
        z = pts.coords
        if extras:
            z = np.vstack([z, sup_samples(spec.domain, extras, seed, cap)])
        mult = refined_sup(lambda w: _inverse_eta0(spec, w), spec.domain, z, cap)
        caveat = MULTIPLIER_PROXY
    else:
        mult = float(multiplier_norm_estimate)
        caveat = MULTIPLIER_USER
    if verdict.verdict != "psd":
        return GenbddResult(None, verdict, f"eta is {verdict.verdict} on samples; bound withheld",
                            eta00, mult)
    return GenbddResult(math.sqrt(eta00) * mult, verdict, caveat, eta00, mult)


@dataclass(frozen=True, eq=False)
class HardyRatioKernel(KernelExpr):
    """prod_i (1 - conj(phi_i(w)) phi_i(z)) / (1 - conj(w_i) z_i) on the polydisc,
    ((1 - <phi(z), phi(w)>) / (1 - <z, w>))^n on the ball.

    Positivity of this kernel is a sufficient condition for C_phi to be
    bounded on the Hardy space; a negative direction disproves it.
    """

    phi: HoloMap
    kind: str
    n: int
    name = "hardy_ratio"
    psd = False

    @property
    def domain(self):
        return self.phi.source

    def _eval(self, x, y):
        self.phi(x), self.phi(y)
        if self.kind == "ball":
            return (self.phi.defect(x, y, "ball") / one_minus_inner(x, y)) ** self.n
        num = self.phi.defect(x, y, "polydisc")
        den = one_minus_inner(x[..., None], y[..., None])
        return np.prod(num / den, axis=-1)

    def _params(self):
        return {"map": self.phi.to_json(), "kind": self.kind, "n": self.n}


def sufficient_condition_check(spec: OperatorSpec, pts: PointSet, tolerance=DEFAULT_PSD_TOL) -> PsdVerdict:
    """PSD verdict for the Hardy ratio kernel of ``spec.map`` on ``pts``."""
    k1, k2 = _hardy_kind(spec.source_kernel), _hardy_kind(spec.target_kernel)
    if k1 is None or k1 != k2 or spec.weight is not None:
        raise ValueError("the sufficient condition needs matching Hardy kernels and no weight")
    return psd_check(HardyRatioKernel(spec.map, k1[0], k1[1]), pts, tolerance)


def _ratio_squares(spec, z):
    num = spec.pulled_back.pairwise(z).real
    den = spec.target_kernel.pairwise(z).real
    return num / den


def lower_bound_kernel_ratio(spec: OperatorSpec, pts: PointSet) -> float:
    """max over pts of sqrt(K1(phi(x), phi(x)) / K2(x, x))."""
    if spec.weight is not None:
        raise ValueError("the kernel ratio bound applies to unweighted composition operators")
    if not pts.domain.same_set(spec.domain):
        raise DomainError(f"points on {pts.domain}, operator acts on functions over {spec.domain}")
    return float(math.sqrt(np.max(_ratio_squares(spec, pts.coords))))


def polydisc_ratio_squares(phi: HoloMap, pts: PointSet) -> np.ndarray:
    """prod_i (1 - |z_i|^2) / (1 - |phi_i(z)|^2) at each point."""
    z = pts.coords
    w = phi(z)
    return np.prod((1 - np.abs(z) ** 2) / (1 - np.abs(w) ** 2), axis=-1)


@dataclass(frozen=True)
class StarRatios:
    lower: np.ndarray   # numerator / (denominator + its tail): safe lower estimate
    weak: np.ndarray    # same with weights (s+1)^(-1-alpha) in the numerator
    slack: np.ndarray
    ok: np.ndarray


def _star_ratios(phi, alpha, z, N):
    w = phi(z)
    n = z.shape[-1]
    num, num_tail, num_env = kc._series_eval(n, alpha, N, w, w)
    den, den_tail, den_env = kc._series_eval(n, alpha, N, z, z)
    weak, weak_tail, weak_env = kc._series_eval(n, -2.0 - alpha, N, w, w)
    num, den, weak = num.real, den.real, weak.real
    limit = kc.SERIES_TAIL_LIMIT
    ok = (num_tail <= limit * num_env) & (den_tail <= limit * den_env) & (weak_tail <= limit * weak_env)
    with np.errstate(invalid="ignore", divide="ignore"):
        lower = num / (den + den_tail)
        weak_r = weak / den
        slack = (num_tail + weak_tail) / den
    return StarRatios(lower, weak_r, slack, ok)


def lower_bound_bergman_star(phi: HoloMap, alpha: float, pts: PointSet, N=kc.DEFAULT_SERIES_TRUNCATION) -> float:
    """Lower bound for ||C_phi||^2 on the series-normed weighted Bergman space.

    Returns max over pts of sum_s |phi(z)|^(2s) w_s / sum_s |z|^(2s) w_s,
    w_s = prod_i (s_i+1)^(1+alpha), with both series truncated at N and the
    denominator's tail added so truncation cannot overstate the ratio. The
    weaker constant with weights (s_i+1)^(-1-alpha) upstairs is checked to
    lie below it.
    """
    if not alpha > -1:
        raise ValueError("alpha must exceed -1")
    if phi.source.kind != "polydisc" and phi.source.dimension > 1:
        raise DomainError("the series-normed Bergman space lives on the polydisc")
    r = _star_ratios(phi, alpha, pts.coords, N)
    if not np.all(r.ok):
        i = int(np.argmin(r.ok))
        raise kc.SeriesTruncationError(f"series tail too large at point {i} of {pts.label!r}; raise N")
    if np.any(r.weak > r.lower * (1 + 1e-12) + r.slack):
        i = int(np.argmax(r.weak - r.lower - r.slack))
        raise InconsistentReportError(f"weak ratio exceeds the series ratio at point {i}")
    return float(np.max(r.lower))


# ---------------------------------------------------------------------------
# the certification loop


@dataclass(frozen=True)
class Budget:
    stages: tuple = DEFAULT_STAGES
    seed: int = 0
    max_points: Optional[int] = None
    oracle_schedule: tuple = matrix_oracle.DEFAULT_SCHEDULE
    cap: float = BOUNDARY_CAP

    def __post_init__(self):
        if len(self.stages) < 1:
            raise ValueError("at least one stage is required")
        if any(b <= a for a, b in zip(self.stages, self.stages[1:])) or self.stages[0] < 1:
            raise ValueError("stage sizes must be positive and strictly increasing")


@dataclass(frozen=True)
class Tolerances:
    psd_tol: float = DEFAULT_PSD_TOL
    ridge: float = DEFAULT_RIDGE
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    growth_ratio: float = GROWTH_RATIO
    plateau: float = PLATEAU
    sandwich_slack: float = SANDWICH_SLACK

    def to_json(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class LowerBound:
    method: str
    value: float
    sample_size: int


@dataclass(frozen=True)
class UpperBound:
    method: str
    value: Optional[float]
    caveat: str


@dataclass(frozen=True, eq=False)
class CertificateReport:
    lower_bounds: tuple
    upper_bounds: tuple
    pencil_trace: tuple
    verdict: str
    seed: int
    tolerances: Tolerances
    checks: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def c_min(self):
        return self.pencil_trace[-1][1]

    def lower(self, method):
        return next((b.value for b in self.lower_bounds if b.method == method), None)

    def upper(self, method):
        return next((b.value for b in self.upper_bounds if b.method == method), None)

    def to_json(self):
        return {
            "verdict": self.verdict,
            "seed": self.seed,
            "pencil_trace": [{"sample_size": m, "c_min": _num(c)} for m, c in self.pencil_trace],
            "lower_bounds": [{"method": b.method, "value": _num(b.value), "sample_size": b.sample_size}
                             for b in self.lower_bounds],
            "upper_bounds": [{"method": b.method, "value": _num(b.value), "caveat": b.caveat}
                             for b in self.upper_bounds],
            "checks": self.checks,
            "tolerances": self.tolerances.to_json(),
            "notes": list(self.notes),
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=False)

    def trace_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_size", "c_min"])
            for m, c in self.pencil_trace:
                w.writerow([m, repr(float(c))])


def _num(v):
    if v is None or not math.isfinite(v):
        return None
    return float(v)


def certification_pool(domain: DomainTag, size: int, seed: int, cap=BOUNDARY_CAP, label="certify") -> PointSet:
    """Origin followed by alternating boundary-biased and uniform points, all
    within radius 1 - cap.

    Every stage of a certification run is a prefix of this one array.
    """
    s_bb, s_u = (int(v) for v in np.random.SeedSequence(seed).generate_state(2))
    half = max(size // 2, 1)
    bb = sample_points(domain, "boundary_biased", half, seed=s_bb, cap=cap).coords
    # shrink uniform points so the cap bounds every point of the pool
    un = (1 - cap) * sample_points(domain, "uniform_random", half, seed=s_u).coords
    mixed = np.empty((2 * half, domain.dimension), dtype=complex)
    mixed[0::2], mixed[1::2] = bb, un
    z = np.vstack([_origin(domain), mixed])[:size]
    return PointSet(z, domain, label, seed)


def classify_trace(values, tol: Tolerances) -> str:
    if max(values) > tol.divergence_threshold:
        return "unbounded_evidence"
    if len(values) >= 3:
        c_last, c_prev = values[-1], values[-3]
        if c_prev > 0 and math.sqrt(c_last / c_prev) > tol.growth_ratio:
            return "unbounded_evidence"
        if c_prev > 0 and (c_last - c_prev) / c_prev < tol.plateau:
            return "bounded_evidence"
    return "inconclusive"


def certify(spec: OperatorSpec, budget: Budget = Budget(), tolerances: Tolerances = Tolerances()) -> CertificateReport:
    """Pencil trace over nested stages plus every closed-form bound that applies."""
    stages = [m for m in budget.stages if budget.max_points is None or m <= budget.max_points]
    if not stages:
        raise ValueError("no stage fits within max_points")
    pool = certification_pool(spec.domain, stages[-1], budget.seed, budget.cap)
    try:
        a, b = _grams(spec, pool)
    except kc.KernelEvaluationError as exc:
        raise kc.KernelEvaluationError(f"Gram assembly on point set {pool.label!r} "
                                       f"({len(pool)} points): {exc}") from exc
    trace = []
    for m in stages:
        try:
            lam = _pencil_lambda(a[:m, :m], b[:m, :m], tolerances.ridge)
        except DegeneratePointsError as exc:
            raise DegeneratePointsError(f"stage {m} of point set {pool.label!r}: {exc}") from exc
        trace.append((m, math.sqrt(max(lam, 0.0))))
    values = [c for _, c in trace]
    verdict = classify_trace(values, tolerances)
    final = pool.prefix(stages[-1], f"{pool.label}[:{stages[-1]}]")
    n_final = len(final)

    lower = [LowerBound("pencil", values[-1], n_final)]
    upper = []
    checks = {}
    notes = [HEURISTIC_NOTE]
    unit = spec.weight is None

    if unit:
        ratio = _ratio_squares(spec, final.coords)
        lower.append(LowerBound("kernel_ratio", float(math.sqrt(np.max(ratio))), n_final))
        lower.append(LowerBound("kernel_ratio_at_origin", float(math.sqrt(ratio[0])), 1))

    disc = unit and _is_hardy_disc(spec.source_kernel) and _is_hardy_disc(spec.target_kernel)
    if disc:
        coarse, refined = upper_bound_hardy_disc(spec.map)
        upper.append(UpperBound("disc_automorphism_coarse", coarse, ""))
        upper.append(UpperBound("disc_sup_refined", refined, SAMPLED_SUP))
        if matrix_oracle.supports(spec.map):
            sched = matrix_oracle.truncation_schedule(spec.map, budget.oracle_schedule, seed=budget.seed)
            n_top, v_top = sched[-1]
            lower.append(LowerBound("oracle_truncation_norm", v_top, n_top))
            lower.append(LowerBound("kernel_section_ratio",
                                    matrix_oracle.kernel_section_ratio_max(spec.map, final.coords[:, 0], n_top),
                                    n_final))
            checks["oracle_schedule"] = [{"N": N, "norm": v} for N, v in sched]
            if len(sched) > 1:
                checks["oracle_last_increment"] = sched[-1][1] - sched[-2][1]
    if unit and isinstance(spec.source_kernel, kc.SeriesBergmanStar) and \
            isinstance(spec.target_kernel, kc.SeriesBergmanStar) and \
            spec.source_kernel.alpha == spec.target_kernel.alpha:
        k = spec.source_kernel
        r = _star_ratios(spec.map, k.alpha, final.coords, k.truncation)
        if np.any(r.ok):
            lower.append(LowerBound("bergman_star_ratio", float(math.sqrt(np.max(r.lower[r.ok]))),
                                    int(np.sum(r.ok))))
    if unit:
        try:
            g = genbdd_upper(spec, final, tolerance=tolerances.psd_tol, seed=budget.seed, cap=budget.cap)
            upper.append(UpperBound("kernel_quotient_multiplier", g.bound, g.caveat))
            checks["eta_psd"] = g.eta_psd.verdict
        except kc.KernelEvaluationError as exc:
            notes.append(f"kernel quotient bound skipped: {exc}")
        k1 = _hardy_kind(spec.source_kernel)
        if k1 is not None and k1 == _hardy_kind(spec.target_kernel):
            checks["sufficient_condition"] = sufficient_condition_check(spec, final, tolerances.psd_tol).verdict

    report = CertificateReport(tuple(lower), tuple(upper), tuple(trace), verdict, budget.seed,
                               tolerances, checks, tuple(notes))
    check_consistency(report)
    return report


def check_consistency(report: CertificateReport):
    """Every lower bound must sit below every caveat-free upper bound."""
    slack = report.tolerances.sandwich_slack
    for ub in report.upper_bounds:
        if ub.caveat or ub.value is None:
            continue
        for lb in report.lower_bounds:
            if lb.value > ub.value + slack:
                raise InconsistentReportError(
                    f"lower bound {lb.method} = {lb.value:.12g} exceeds upper bound "
                    f"{ub.method} = {ub.value:.12g}")
