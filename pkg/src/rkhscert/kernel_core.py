"""Kernel functions as evaluable expression trees.

Builtins are the Hardy and weighted Bergman kernels of the disc, polydisc and
ball; combinators implement the closure rules for kernels (sums, pointwise
products, non-negative scaling, pullback along a map, rank-one kernels
f(x) conj(f(y)), and weighted pullbacks psi(x) conj(psi(y)) K(phi(x), phi(y))).
``Difference`` exists only to express test objects such as c^2 K2 - rho and
carries no positivity guarantee.

Non-integer powers (1 - <z, w>)^(-beta) use the principal branch; the base has
positive real part for z, w in the open ball, so the branch is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._json import ConfigError, require
from .domain import DomainError, DomainTag, Point, one_minus_inner
from .holomap import Compose, HoloFunc, HoloMap, func_from_json, map_from_json

# Below this modulus 1 - <z, w> is treated as a boundary singularity.
SINGULARITY_FLOOR = 1e-14
DEFAULT_SERIES_TRUNCATION = 60
SERIES_TAIL_LIMIT = 0.1


class KernelEvaluationError(ArithmeticError):
    pass


class SeriesTruncationError(KernelEvaluationError):
    pass


def _guarded_base(z, w, what):
    return _guard(one_minus_inner(z, w), what)


def _guard(base, what):
    small = np.abs(base) < SINGULARITY_FLOOR
    if np.any(small):
        idx = tuple(int(i) for i in np.argwhere(small)[0])
        raise KernelEvaluationError(
            f"{what}: |1 - <z, w>| below {SINGULARITY_FLOOR:g} at pair index {idx}; "
            "point too close to the boundary")
    return base


def _neg_power(base, beta):
    if float(beta).is_integer():
        return 1.0 / base ** int(beta)
    return np.power(base, -float(beta))


class KernelExpr:
    """A kernel K on ``domain``; call :meth:`matrix` for Gram blocks."""

    domain: DomainTag
    name: str = "kernel"
    psd = True

    def _eval(self, x, y):
        raise NotImplementedError

    def _pulled(self, phi, x, y, fx, fy):
        """K(phi(x), phi(y)) given the images; builtins use the map's defect instead."""
        return self._eval(fx, fy)

    def matrix(self, x, y=None) -> np.ndarray:
        """Matrix [K(x_i, y_j)] for point arrays of shape (m, n) and (p, n)."""
        x = np.asarray(x, dtype=complex)
        y = x if y is None else np.asarray(y, dtype=complex)
        return self._eval(x[:, None, :], y[None, :, :])

    def pairwise(self, x, y=None) -> np.ndarray:
        """Vector [K(x_i, y_i)]; with ``y`` omitted, the diagonal K(x_i, x_i)."""
        x = np.asarray(x, dtype=complex)
        y = x if y is None else np.asarray(y, dtype=complex)
        return self._eval(x, y)

    def at(self, x: Point, y: Point) -> complex:
        return eval_kernel(self, x, y)

    def children(self):
        return ()

    def _params(self):
        return {}

    def to_json(self):
        return {"node": self.name, "params": self._params(),
                "children": [c.to_json() for c in self.children()]}

    def _compatible(self, other):
        if not isinstance(other, KernelExpr):
            return NotImplemented
        if not self.domain.same_set(other.domain):
            raise DomainError(f"kernel domains {self.domain} and {other.domain} differ")
        return other

    def __add__(self, other):
        return Sum(self, self._compatible(other))

    def __mul__(self, other):
        if isinstance(other, KernelExpr):
            return Product(self, self._compatible(other))
        return Scale(float(other), self)

    def __rmul__(self, other):
        return Scale(float(other), self)

    def __sub__(self, other):
        return Difference(self, self._compatible(other))


def eval_kernel(k: KernelExpr, x: Point, y: Point) -> complex:
    if not (x.domain.same_set(k.domain) and y.domain.same_set(k.domain)):
        raise DomainError(f"points on {x.domain}/{y.domain} but kernel lives on {k.domain}")
    return complex(k.pairwise(x.array[None, :], y.array[None, :])[0])


# ---------------------------------------------------------------------------
# builtins


@dataclass(frozen=True, eq=False)
class HardyDisc(KernelExpr):
    """1 / (1 - conj(w) z)."""

    name = "hardy_disc"
    domain = DomainTag.disc()

    def _eval(self, x, y):
        return 1.0 / _guarded_base(x, y, self.name)

    def _pulled(self, phi, x, y, fx, fy):
        return 1.0 / _guard(phi.defect(x, y, "ball"), self.name)


@dataclass(frozen=True, eq=False)
class HardyPolydisc(KernelExpr):
    """prod_i 1 / (1 - conj(w_i) z_i)."""

    n: int
    name = "hardy_polydisc"

    @property
    def domain(self):
        return DomainTag.polydisc(self.n)

    def _eval(self, x, y):
        out = 1.0
        for i in range(self.n):
            out = out / _guarded_base(x[..., i:i + 1], y[..., i:i + 1], self.name)
        return out

    def _pulled(self, phi, x, y, fx, fy):
        d = _guard(phi.defect(x, y, "polydisc"), self.name)
        return 1.0 / np.prod(d, axis=-1)

    def _params(self):
        return {"n": self.n}


@dataclass(frozen=True, eq=False)
class HardyBall(KernelExpr):
    """1 / (1 - <z, w>)^n."""

    n: int
    name = "hardy_ball"

    @property
    def domain(self):
        return DomainTag.ball(self.n)

    def _eval(self, x, y):
        return _neg_power(_guarded_base(x, y, self.name), self.n)

    def _pulled(self, phi, x, y, fx, fy):
        return _neg_power(_guard(phi.defect(x, y, "ball"), self.name), self.n)

    def _params(self):
        return {"n": self.n}


@dataclass(frozen=True, eq=False)
class BergmanPolydisc(KernelExpr):
    """prod_i 1 / (1 - conj(w_i) z_i)^(alpha + 2)."""

    n: int
    alpha: float
    name = "bergman_polydisc"

    def __post_init__(self):
        if not self.alpha > -1:
            raise ValueError("Bergman weight alpha must exceed -1")

    @property
    def domain(self):
        return DomainTag.polydisc(self.n)

    def _eval(self, x, y):
        out = 1.0
        for i in range(self.n):
            base = _guarded_base(x[..., i:i + 1], y[..., i:i + 1], self.name)
            out = out * _neg_power(base, self.alpha + 2)
        return out

    def _pulled(self, phi, x, y, fx, fy):
        d = _guard(phi.defect(x, y, "polydisc"), self.name)
        return np.prod(_neg_power(d, self.alpha + 2), axis=-1)

    def _params(self):
        return {"n": self.n, "alpha": self.alpha}


@dataclass(frozen=True, eq=False)
class BergmanBall(KernelExpr):
    """1 / (1 - <z, w>)^(n + 1 + alpha)."""

    n: int
    alpha: float
    name = "bergman_ball"

    def __post_init__(self):
        if not self.alpha > -1:
            raise ValueError("Bergman weight alpha must exceed -1")

    @property
    def domain(self):
        return DomainTag.ball(self.n)

    def _eval(self, x, y):
        return _neg_power(_guarded_base(x, y, self.name), self.n + 1 + self.alpha)

    def _pulled(self, phi, x, y, fx, fy):
        return _neg_power(_guard(phi.defect(x, y, "ball"), self.name), self.n + 1 + self.alpha)

    def _params(self):
        return {"n": self.n, "alpha": self.alpha}


class SeriesValue(NamedTuple):
    value: complex
    tail_bound: float


def _series_tail(q, p, N):
    """Envelope tail sum_{k>N} (k+1)^p q^k and partial sum_{k<=N} (k+1)^p q^k."""
    q = np.asarray(q, dtype=float)
    coeffs = (np.arange(N + 1) + 1.0) ** p
    partial = np.full(q.shape, coeffs[N])
    for c in coeffs[N - 1::-1]:
        partial = partial * q + c
    first = (N + 2.0) ** p * q ** (N + 1)
    # term ratios ((k+2)/(k+1))^p q are bounded by the k = N+1 one for p >= 0, by q for p < 0
    ratio = max(1.0, ((N + 3.0) / (N + 2.0)) ** p) * q
    with np.errstate(divide="ignore"):
        tail = np.where(ratio < 1, first / np.maximum(1 - ratio, 1e-300), np.inf)
    return tail, partial


def _series_eval(n, alpha, N, x, y):
    p = 1.0 + alpha
    coeffs = (np.arange(N + 1) + 1.0) ** p
    value = 1.0
    for i in range(n):
        t = x[..., i] * np.conj(y[..., i])
        acc = np.full(np.broadcast(t).shape, coeffs[N], dtype=complex)
        for c in coeffs[N - 1::-1]:
            acc = acc * t + c
        value = value * acc
    r = np.maximum(np.max(np.abs(x), axis=-1), np.max(np.abs(y), axis=-1))
    tail, partial = _series_tail(r ** 2, p, N)
    envelope = partial ** n
    with np.errstate(over="ignore", invalid="ignore"):
        bound = envelope * np.expm1(n * np.log1p(tail / partial))
    return value, bound, envelope


@dataclass(frozen=True, eq=False)
class SeriesBergmanStar(KernelExpr):
    """Equivalent-norm Bergman kernel sum_s (conj(w) z)^s prod_i (s_i+1)^(1+alpha),
    truncated to multi-indices with every s_i <= N.

    The series factorises over coordinates, so it is evaluated as a product
    of one-variable truncated sums.
    """

    n: int
    alpha: float
    truncation: int = DEFAULT_SERIES_TRUNCATION
    name = "series_bergman_star"

    def __post_init__(self):
        if not self.alpha > -1:
            raise ValueError("Bergman weight alpha must exceed -1")
        if self.truncation < 1:
            raise ValueError("series truncation N must be >= 1")

    @property
    def domain(self):
        return DomainTag.polydisc(self.n)

    def _eval(self, x, y):
        value, bound, envelope = _series_eval(self.n, self.alpha, self.truncation, x, y)
        bad = bound > SERIES_TAIL_LIMIT * envelope
        if np.any(bad):
            raise SeriesTruncationError(
                f"series tail bound exceeds {SERIES_TAIL_LIMIT:.0%} of the partial sum "
                f"at pair index {tuple(int(i) for i in np.argwhere(bad)[0])}; raise N")
        return value

    def _params(self):
        return {"n": self.n, "alpha": self.alpha, "truncation": self.truncation}


def series_bergman_star_eval(n, alpha, N, x: Point, y: Point) -> SeriesValue:
    """Truncated equivalent-norm Bergman series at (x, y) with its tail bound."""
    if N < 1:
        raise ValueError("series truncation N must be >= 1")
    if not alpha > -1:
        raise ValueError("Bergman weight alpha must exceed -1")
    dom = DomainTag.polydisc(n)
    if not (x.domain.same_set(dom) and y.domain.same_set(dom)):
        raise DomainError(f"series kernel lives on {dom}")
    value, bound, envelope = _series_eval(n, alpha, N, x.array, y.array)
    value, bound = complex(value), float(bound)
    if bound > SERIES_TAIL_LIMIT * float(envelope):
        raise SeriesTruncationError(
            f"tail bound {bound:.3g} exceeds {SERIES_TAIL_LIMIT:.0%} of the envelope partial sum "
            f"{float(envelope):.3g}; raise N")
    return SeriesValue(value, bound)


# ---------------------------------------------------------------------------
# combinators


@dataclass(frozen=True, eq=False)
class Sum(KernelExpr):
    left: KernelExpr
    right: KernelExpr
    name = "sum"

    def __post_init__(self):
        _same(self.left, self.right)

    @property
    def domain(self):
        return self.left.domain

    @property
    def psd(self):
        return self.left.psd and self.right.psd

    def _eval(self, x, y):
        return self.left._eval(x, y) + self.right._eval(x, y)

    def _pulled(self, phi, x, y, fx, fy):
        return self.left._pulled(phi, x, y, fx, fy) + self.right._pulled(phi, x, y, fx, fy)

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Product(KernelExpr):
    left: KernelExpr
    right: KernelExpr
    name = "product"

    def __post_init__(self):
        _same(self.left, self.right)

    @property
    def domain(self):
        return self.left.domain

    @property
    def psd(self):
        return self.left.psd and self.right.psd

    def _eval(self, x, y):
        return self.left._eval(x, y) * self.right._eval(x, y)

    def _pulled(self, phi, x, y, fx, fy):
        return self.left._pulled(phi, x, y, fx, fy) * self.right._pulled(phi, x, y, fx, fy)

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Scale(KernelExpr):
    c: float
    kernel: KernelExpr
    name = "scale"

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("kernel scale factor must be non-negative")

    @property
    def domain(self):
        return self.kernel.domain

    @property
    def psd(self):
        return self.kernel.psd

    def _eval(self, x, y):
        return self.c * self.kernel._eval(x, y)

    def _pulled(self, phi, x, y, fx, fy):
        return self.c * self.kernel._pulled(phi, x, y, fx, fy)

    def children(self):
        return (self.kernel,)

    def _params(self):
        return {"c": self.c}


@dataclass(frozen=True, eq=False)
class Pullback(KernelExpr):
    """K(phi(x), phi(y)) on the source domain of phi."""

    kernel: KernelExpr
    phi: HoloMap
    name = "pullback"

    def __post_init__(self):
        if not self.phi.target.same_set(self.kernel.domain):
            raise DomainError(f"map lands in {self.phi.target}, kernel lives on {self.kernel.domain}")

    @property
    def domain(self):
        return self.phi.source

    @property
    def psd(self):
        return self.kernel.psd

    def _eval(self, x, y):
        return self.kernel._pulled(self.phi, x, y, self.phi(x), self.phi(y))

    def _pulled(self, phi, x, y, fx, fy):
        return self.kernel._pulled(Compose(self.phi, phi), x, y, self.phi(fx), self.phi(fy))

    def children(self):
        return (self.kernel,)

    def _params(self):
        return {"map": self.phi.to_json()}


@dataclass(frozen=True, eq=False)
class RankOne(KernelExpr):
    """f(x) conj(f(y))."""

    f: HoloFunc
    name = "rank_one"

    @property
    def domain(self):
        return self.f.domain

    def _eval(self, x, y):
        return self.f(x) * np.conj(self.f(y))

    def _params(self):
        return {"func": self.f.to_json()}


@dataclass(frozen=True, eq=False)
class WeightedPullback(KernelExpr):
    """psi(x) conj(psi(y)) K(phi(x), phi(y))."""

    kernel: KernelExpr
    phi: HoloMap
    psi: HoloFunc
    name = "weighted_pullback"

    def __post_init__(self):
        if not self.phi.target.same_set(self.kernel.domain):
            raise DomainError(f"map lands in {self.phi.target}, kernel lives on {self.kernel.domain}")
        if not self.psi.domain.same_set(self.phi.source):
            raise DomainError(f"weight lives on {self.psi.domain}, map starts on {self.phi.source}")

    @property
    def domain(self):
        return self.phi.source

    @property
    def psd(self):
        return self.kernel.psd

    def _eval(self, x, y):
        k = self.kernel._pulled(self.phi, x, y, self.phi(x), self.phi(y))
        return self.psi(x) * np.conj(self.psi(y)) * k

    def children(self):
        return (self.kernel,)

    def _params(self):
        return {"map": self.phi.to_json(), "weight": self.psi.to_json()}


@dataclass(frozen=True, eq=False)
class Difference(KernelExpr):
    """left - right; not a kernel in general."""

    left: KernelExpr
    right: KernelExpr
    name = "difference"
    psd = False

    def __post_init__(self):
        _same(self.left, self.right)

    @property
    def domain(self):
        return self.left.domain

    def _eval(self, x, y):
        return self.left._eval(x, y) - self.right._eval(x, y)

    def children(self):
        return (self.left, self.right)


def _same(a, b):
    if not a.domain.same_set(b.domain):
        raise DomainError(f"kernel domains {a.domain} and {b.domain} differ")


def sum(k1, k2):  # noqa: A001 - mirrors the kernel calculus vocabulary
    return Sum(k1, k2)


def product(k1, k2):
    return Product(k1, k2)


def scale(c, k):
    return Scale(float(c), k)


def pullback(k, phi):
    return Pullback(k, phi)


def rank_one(f):
    return RankOne(f)


def weighted_pullback(k, phi, psi=None):
    if psi is None:
        return Pullback(k, phi)
    return WeightedPullback(k, phi, psi)


def difference(k1, k2):
    return Difference(k1, k2)


# ---------------------------------------------------------------------------
# JSON

_BUILTINS = {
    "hardy_disc": lambda p, path: HardyDisc(),
    "hardy_polydisc": lambda p, path: HardyPolydisc(_int(p, "n", path)),
    "hardy_ball": lambda p, path: HardyBall(_int(p, "n", path)),
    "bergman_polydisc": lambda p, path: BergmanPolydisc(_int(p, "n", path), _float(p, "alpha", path)),
    "bergman_ball": lambda p, path: BergmanBall(_int(p, "n", path), _float(p, "alpha", path)),
    "series_bergman_star": lambda p, path: SeriesBergmanStar(
        _int(p, "n", path), _float(p, "alpha", path),
        int(p.get("truncation", DEFAULT_SERIES_TRUNCATION))),
}


def _int(p, key, path):
    v = require(p, key, path)
    if not isinstance(v, int) or v < 1:
        raise ConfigError("expected a positive integer", f"{path}.{key}")
    return v


def _float(p, key, path):
    v = require(p, key, path)
    if not isinstance(v, (int, float)):
        raise ConfigError("expected a number", f"{path}.{key}")
    return float(v)


def kernel_from_json(obj, path="$") -> KernelExpr:
    name = require(obj, "node", path)
    p = obj.get("params", {}) or {}
    kids = obj.get("children", []) or []
    pp = f"{path}.params"

    def child(i):
        if i >= len(kids):
            raise ConfigError(f"node {name!r} needs {i + 1} children", f"{path}.children")
        return kernel_from_json(kids[i], f"{path}.children[{i}]")

    try:
        if name in _BUILTINS:
            return _BUILTINS[name](p, pp)
        if name == "sum":
            return Sum(child(0), child(1))
        if name == "product":
            return Product(child(0), child(1))
        if name == "difference":
            return Difference(child(0), child(1))
        if name == "scale":
            return Scale(_float(p, "c", pp), child(0))
        if name == "pullback":
            return Pullback(child(0), map_from_json(require(p, "map", pp), f"{pp}.map"))
        if name == "rank_one":
            return RankOne(func_from_json(require(p, "func", pp), f"{pp}.func"))
        if name == "weighted_pullback":
            return WeightedPullback(child(0), map_from_json(require(p, "map", pp), f"{pp}.map"),
                                    func_from_json(require(p, "weight", pp), f"{pp}.weight"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from exc
    raise ConfigError(f"unknown kernel node {name!r}", f"{path}.node")
