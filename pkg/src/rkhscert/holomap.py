"""Closed-form holomorphic functions and maps between disc, polydisc and ball.

Everything here evaluates on arrays of points of shape ``(..., n)`` so that
Gram assembly can broadcast; single-point helpers wrap the array path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._json import ConfigError, dec_complex, dec_vector, enc_complex, enc_vector, require
from .domain import DomainError, DomainTag, Point, one_minus_inner

# Denominators smaller than this are treated as singular.
DENOMINATOR_FLOOR = 1e-14


def _check_denominator(den, what):
    small = np.abs(den) < DENOMINATOR_FLOOR
    if np.any(small):
        raise ZeroDivisionError(f"{what}: denominator modulus below {DENOMINATOR_FLOOR:g}")


def _poly_eval(terms, z):
    out = np.zeros(z.shape[:-1], dtype=complex)
    for exps, coeff in terms.items():
        mono = np.full(z.shape[:-1], complex(coeff))
        for i, e in enumerate(exps):
            if e:
                mono = mono * z[..., i] ** e
        out = out + mono
    return out


def _terms_to_json(terms):
    return [{"exponents": list(e), "coeff": enc_complex(c)} for e, c in sorted(terms.items())]


def _terms_from_json(items, n, path):
    if not isinstance(items, list):
        raise ConfigError("expected a list of terms", path)
    terms = {}
    for i, t in enumerate(items):
        exps = require(t, "exponents", f"{path}[{i}]")
        if not (isinstance(exps, list) and len(exps) == n and all(isinstance(e, int) and e >= 0 for e in exps)):
            raise ConfigError(f"exponents must be {n} non-negative integers", f"{path}[{i}].exponents")
        key = tuple(exps)
        terms[key] = terms.get(key, 0j) + dec_complex(require(t, "coeff", f"{path}[{i}]"), f"{path}[{i}].coeff")
    return terms


# ---------------------------------------------------------------------------
# scalar holomorphic functions


class HoloFunc:
    """Scalar holomorphic function on a domain.

    Supports ``f + g``, ``f - g``, ``f * g``, ``f / g`` and scalar arithmetic.
    """

    domain: DomainTag

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self._eval(z)

    def at(self, x: Point) -> complex:
        return complex(self(x.array[None, :])[0])

    def _eval(self, z):
        raise NotImplementedError

    def _lift(self, other):
        if isinstance(other, HoloFunc):
            if not other.domain.same_set(self.domain):
                raise DomainError(f"function domains {self.domain} and {other.domain} differ")
            return other
        return ConstantFunc(complex(other), self.domain)

    def __add__(self, other):
        return SumFunc(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SumFunc(self, ProductFunc(ConstantFunc(-1.0, self.domain), self._lift(other)))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        return ProductFunc(self, self._lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return QuotientFunc(self, self._lift(other))

    def __rtruediv__(self, other):
        return QuotientFunc(self._lift(other), self)

    def to_json(self):
        return {"func": self.name, "params": self._params()}


@dataclass(frozen=True, eq=False)
class ConstantFunc(HoloFunc):
    value: complex
    domain: DomainTag
    name = "constant"

    def _eval(self, z):
        return np.full(z.shape[:-1], complex(self.value))

    def _params(self):
        return {"value": enc_complex(self.value), "domain": str(self.domain)}


@dataclass(frozen=True, eq=False)
class CoordinateFunc(HoloFunc):
    index: int
    domain: DomainTag
    name = "coordinate"

    def __post_init__(self):
        if not 0 <= self.index < self.domain.dimension:
            raise ValueError(f"coordinate index {self.index} out of range for {self.domain}")

    def _eval(self, z):
        return z[..., self.index]

    def _params(self):
        return {"index": self.index, "domain": str(self.domain)}


@dataclass(frozen=True, eq=False)
class PolynomialFunc(HoloFunc):
    terms: dict
    domain: DomainTag
    name = "polynomial"

    def _eval(self, z):
        return _poly_eval(self.terms, z)

    def _params(self):
        return {"terms": _terms_to_json(self.terms), "domain": str(self.domain)}


@dataclass(frozen=True, eq=False)
class InnerProductFunc(HoloFunc):
    """z -> <z, a>."""

    a: tuple
    domain: DomainTag
    name = "inner_product"

    def _eval(self, z):
        return np.sum(z * np.conj(np.array(self.a, dtype=complex)), axis=-1)

    def _params(self):
        return {"a": enc_vector(self.a), "domain": str(self.domain)}


@dataclass(frozen=True, eq=False)
class MobiusFunc(HoloFunc):
    """z -> e^{i theta} (a - z_k) / (1 - conj(a) z_k) in coordinate k."""

    a: complex
    theta: float
    index: int
    domain: DomainTag
    name = "mobius"

    def __post_init__(self):
        if abs(self.a) >= 1:
            raise DomainError("Mobius parameter must lie in the open disc")

    def _eval(self, z):
        zk = z[..., self.index]
        return np.exp(1j * self.theta) * (self.a - zk) / (1 - np.conj(self.a) * zk)

    def _params(self):
        return {"a": enc_complex(self.a), "theta": self.theta, "index": self.index,
                "domain": str(self.domain)}


@dataclass(frozen=True, eq=False)
class SumFunc(HoloFunc):
    left: HoloFunc
    right: HoloFunc
    name = "sum"

    @property
    def domain(self):
        return self.left.domain

    def _eval(self, z):
        return self.left._eval(z) + self.right._eval(z)

    def _params(self):
        return {"left": self.left.to_json(), "right": self.right.to_json()}


@dataclass(frozen=True, eq=False)
class ProductFunc(HoloFunc):
    left: HoloFunc
    right: HoloFunc
    name = "product"

    @property
    def domain(self):
        return self.left.domain

    def _eval(self, z):
        return self.left._eval(z) * self.right._eval(z)

    def _params(self):
        return {"left": self.left.to_json(), "right": self.right.to_json()}


@dataclass(frozen=True, eq=False)
class QuotientFunc(HoloFunc):
    numerator: HoloFunc
    denominator: HoloFunc
    name = "quotient"

    @property
    def domain(self):
        return self.numerator.domain

    def _eval(self, z):
        den = self.denominator._eval(z)
        _check_denominator(den, "quotient")
        return self.numerator._eval(z) / den

    def _params(self):
        return {"numerator": self.numerator.to_json(), "denominator": self.denominator.to_json()}


@dataclass(frozen=True, eq=False)
class ComposedFunc(HoloFunc):
    """f o phi."""

    func: HoloFunc
    inner: "HoloMap"
    name = "compose"

    def __post_init__(self):
        if not self.inner.target.same_set(self.func.domain):
            raise DomainError(f"cannot compose: map lands in {self.inner.target}, "
                              f"function lives on {self.func.domain}")

    @property
    def domain(self):
        return self.inner.source

    def _eval(self, z):
        return self.func._eval(self.inner(z))

    def _params(self):
        return {"func": self.func.to_json(), "inner": self.inner.to_json()}


def kernel_section(w, domain: DomainTag, power=1) -> HoloFunc:
    """The function z -> 1 / (1 - <z, w>)^power."""
    w = tuple(np.atleast_1d(np.asarray(w, dtype=complex)))
    one = ConstantFunc(1.0, domain)
    base = one - InnerProductFunc(w, domain)
    den = base
    for _ in range(power - 1):
        den = den * base
    return one / den


# ---------------------------------------------------------------------------
# maps


class HoloMap:
    """Holomorphic map ``source -> target``.

    Calling the map validates that every image lies strictly inside the
    target; a violation raises :class:`DomainError` carrying the source point.
    """

    source: DomainTag
    target: DomainTag

    def __call__(self, z, validate=True):
        z = np.asarray(z, dtype=complex)
        out = self._eval(z)
        if validate:
            bad = np.ravel(~self.target.contains(out))
            if np.any(bad):
                i = int(np.argmax(bad))
                src = z.reshape(-1, z.shape[-1])[i] if z.size else z
                raise DomainError(
                    f"{self.name}: not a self-map at this sample; image of "
                    f"{_fmt(src)} leaves {self.target}", point=src)
        return out

    def _eval(self, z):
        raise NotImplementedError

    def defect(self, x, y, kind="ball"):
        """1 - <phi(x), phi(y)> for ``kind="ball"``; for ``"polydisc"`` the
        per-coordinate 1 - phi_i(x) conj(phi_i(y)) along the last axis.

        Maps with closed forms (identity, Mobius factors, ball automorphisms
        and compositions of these) avoid forming phi(x) conj(phi(y)) and keep
        full relative precision near the boundary.
        """
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        return self._defect(x, y, kind, lambda k: plain_defect(x, y, k))

    def _defect(self, x, y, kind, base):
        # base(kind) gives the defect of the input points themselves
        return plain_defect(self._eval(x), self._eval(y), kind)

    def to_json(self):
        return {"map": self.name, "params": self._params()}

    def __matmul__(self, other):
        return Compose(self, other)


def plain_defect(x, y, kind):
    if kind == "ball":
        return one_minus_inner(x, y)
    return one_minus_inner(x[..., None], y[..., None])


def _as_kind(d, kind):
    """Shape a one-variable defect (...) for ``kind``."""
    return d if kind == "ball" else d[..., None]


def _fmt(z):
    return "(" + ", ".join(f"{complex(c):.6g}" for c in np.ravel(z)) + ")"


def eval_map(m: HoloMap, x: Point) -> Point:
    if not x.domain.same_set(m.source):
        raise DomainError(f"point lives on {x.domain}, map expects {m.source}")
    y = m(x.array[None, :])[0]
    return Point(tuple(y), m.target)


def eval_map_at_origin(m: HoloMap) -> Point:
    return eval_map(m, Point.origin(m.source))


@dataclass(frozen=True, eq=False)
class Identity(HoloMap):
    domain: DomainTag
    name = "identity"

    @property
    def source(self):
        return self.domain

    @property
    def target(self):
        return self.domain

    def _eval(self, z):
        return z

    def _defect(self, x, y, kind, base):
        return base(kind)

    def _params(self):
        return {"domain": str(self.domain)}


@dataclass(frozen=True, eq=False)
class ConstantMap(HoloMap):
    value: tuple
    source: DomainTag
    target: DomainTag
    name = "constant"

    def __post_init__(self):
        v = tuple(complex(c) for c in np.atleast_1d(self.value))
        object.__setattr__(self, "value", v)
        self.target.check(np.array(v), "constant value")

    def _eval(self, z):
        return np.broadcast_to(np.array(self.value, dtype=complex),
                               z.shape[:-1] + (self.target.dimension,)).copy()

    def _params(self):
        return {"value": enc_vector(self.value), "source": str(self.source), "target": str(self.target)}


@dataclass(frozen=True, eq=False)
class MobiusDisc(HoloMap):
    """z -> e^{i theta} (a - z) / (1 - conj(a) z) on the disc."""

    a: complex
    theta: float = 0.0
    name = "mobius_disc"
    source = DomainTag.disc()
    target = DomainTag.disc()

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        if abs(self.a) >= 1:
            raise DomainError(f"Mobius parameter {self.a} must lie in the open disc")

    def _eval(self, z):
        a = self.a
        return np.exp(1j * self.theta) * (a - z) / (1 - np.conj(a) * z)

    def _defect(self, x, y, kind, base):
        a = self.a
        d = (1 - abs(a) ** 2) * base("ball") / ((1 - np.conj(a) * x[..., 0]) * (1 - a * np.conj(y[..., 0])))
        return _as_kind(d, kind)

    def _params(self):
        return {"a": enc_complex(self.a), "theta": self.theta}


@dataclass(frozen=True, eq=False)
class BallAutomorphism(HoloMap):
    """Involutive automorphism of the ball exchanging 0 and ``a``.

    phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>) with s_a = sqrt(1 - |a|^2),
    P_a the orthogonal projection onto span(a) and Q_a = I - P_a.
    """

    a: tuple
    name = "ball_automorphism"

    def __post_init__(self):
        a = tuple(complex(c) for c in np.atleast_1d(self.a))
        object.__setattr__(self, "a", a)
        DomainTag.ball(len(a)).check(np.array(a), "automorphism parameter")

    @property
    def source(self):
        return DomainTag.ball(len(self.a))

    target = source

    def _eval(self, z):
        a = np.array(self.a, dtype=complex)
        aa = float(np.sum(np.abs(a) ** 2))
        s = math.sqrt(1.0 - aa)
        za = np.sum(z * np.conj(a), axis=-1)[..., None]
        proj = (za / aa) * a if aa > 0 else np.zeros_like(z)
        num = a - proj - s * (z - proj)
        return num / one_minus_inner(z, a)[..., None]

    def _defect(self, x, y, kind, base):
        if kind != "ball" and len(self.a) > 1:
            return super()._defect(x, y, kind, base)
        a = np.array(self.a, dtype=complex)
        aa = float(np.sum(np.abs(a) ** 2))
        d = (1 - aa) * base("ball") / (one_minus_inner(x, a) * np.conj(one_minus_inner(y, a)))
        return _as_kind(d, kind)

    def _params(self):
        return {"a": enc_vector(self.a)}


@dataclass(frozen=True, eq=False)
class CoordinateWise(HoloMap):
    """(z_1..z_n) -> (phi_1(z_sigma(1)), ..., phi_n(z_sigma(n))) on the polydisc.

    ``permutation`` is zero-based; ``None`` means the identity.
    """

    factors: tuple
    permutation: tuple = None
    name = "coordinate_wise"

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        n = len(self.factors)
        perm = tuple(range(n)) if self.permutation is None else tuple(int(p) for p in self.permutation)
        if sorted(perm) != list(range(n)):
            raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
        object.__setattr__(self, "permutation", perm)
        for f in self.factors:
            if f.source.dimension != 1 or f.target.dimension != 1:
                raise DomainError("coordinate-wise factors must be maps of the disc")

    @property
    def source(self):
        return DomainTag.polydisc(len(self.factors))

    @property
    def target(self):
        return DomainTag.polydisc(len(self.factors))

    def _eval(self, z):
        cols = [f._eval(z[..., [s]])[..., 0] for f, s in zip(self.factors, self.permutation)]
        return np.stack(cols, axis=-1)

    def _defect(self, x, y, kind, base):
        if kind == "ball" and len(self.factors) > 1:
            return super()._defect(x, y, kind, base)
        bp = base("polydisc")
        cols = []
        for f, s in zip(self.factors, self.permutation):
            sub = (lambda k, s=s: bp[..., s] if k == "ball" else bp[..., [s]])
            cols.append(f._defect(x[..., [s]], y[..., [s]], "polydisc", sub)[..., 0])
        d = np.stack(cols, axis=-1)
        return d[..., 0] if kind == "ball" else d

    def _params(self):
        return {"factors": [f.to_json() for f in self.factors], "permutation": list(self.permutation)}


@dataclass(frozen=True, eq=False)
class PolynomialMap(HoloMap):
    """Each output coordinate is a polynomial given as ``{exponents: coeff}``."""

    table: tuple
    source: DomainTag
    target: DomainTag
    name = "polynomial"

    def __post_init__(self):
        table = tuple(dict(t) for t in self.table)
        object.__setattr__(self, "table", table)
        if len(table) != self.target.dimension:
            raise ValueError("one polynomial per target coordinate is required")
        for t in table:
            for e in t:
                if len(e) != self.source.dimension:
                    raise ValueError(f"exponent tuple {e} does not match {self.source}")

    def _eval(self, z):
        return np.stack([_poly_eval(t, z) for t in self.table], axis=-1)

    def _params(self):
        return {"table": [_terms_to_json(t) for t in self.table],
                "source": str(self.source), "target": str(self.target)}


@dataclass(frozen=True, eq=False)
class ScalarTimesIdentity(HoloMap):
    """z -> g(z) z on the ball, for g mapping the ball into the disc."""

    g: HoloFunc
    name = "scalar_times_identity"

    def __post_init__(self):
        if self.g.domain.kind != "ball":
            raise DomainError("g(z) z maps are defined on the ball")

    @property
    def source(self):
        return self.g.domain

    @property
    def target(self):
        return self.g.domain

    def _eval(self, z):
        return self.g._eval(z)[..., None] * z

    def _params(self):
        return {"g": self.g.to_json()}


@dataclass(frozen=True, eq=False)
class DiagonalEmbed(HoloMap):
    """(z_1, z_2) -> (z_1, z_1) on the bidisc; unbounded on H^2."""

    name = "diagonal_embed"
    source = DomainTag.polydisc(2)
    target = DomainTag.polydisc(2)

    def _eval(self, z):
        return np.stack([z[..., 0], z[..., 0]], axis=-1)

    def _params(self):
        return {}


@dataclass(frozen=True, eq=False)
class Compose(HoloMap):
    """outer o inner (inner is applied first)."""

    outer: HoloMap
    inner: HoloMap
    name = "compose"

    def __post_init__(self):
        if not self.inner.target.same_set(self.outer.source):
            raise DomainError(f"cannot compose: inner lands in {self.inner.target}, "
                              f"outer starts on {self.outer.source}")

    @property
    def source(self):
        return self.inner.source

    @property
    def target(self):
        return self.outer.target

    def _eval(self, z):
        return self.outer._eval(self.inner._eval(z))

    def _defect(self, x, y, kind, base):
        ix, iy = self.inner._eval(x), self.inner._eval(y)
        return self.outer._defect(ix, iy, kind, lambda k: self.inner._defect(x, y, k, base))

    def _params(self):
        return {"outer": self.outer.to_json(), "inner": self.inner.to_json()}


# ---------------------------------------------------------------------------
# the ball automorphism identity


@dataclass(frozen=True)
class AutomorphismCheck:
    passed: bool
    max_residual: float
    max_factorization_residual: float
    trials: int


def _uniform_ball(rng, n, size):
    g = rng.normal(size=(size, n)) + 1j * rng.normal(size=(size, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(size=size) ** (1.0 / (2 * n))
    return 0.999 * r[:, None] * g


def verify_ball_automorphism_identity(a: Point, trials=500, tol=1e-10, seed=0) -> AutomorphismCheck:
    """Check 1 - <phi(z), phi(w)> = (1-|a|^2)(1-<z,w>) / ((1-<z,a>)(1-<a,w>))
    on random pairs, together with the rank-one factorisation of the quotient
    (1 - <phi z, phi w>) / (1 - <z, w>) = (1-|a|^2) K_a(z) conj(K_a(w))."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phi = BallAutomorphism(a.coords)
    n = len(a.coords)
    av = a.array
    rng = np.random.default_rng(seed)
    z = _uniform_ball(rng, n, trials)
    w = _uniform_ball(rng, n, trials)
    pz, pw = phi(z), phi(w)
    lhs = one_minus_inner(pz, pw)
    aa = 1.0 - float(np.sum(np.abs(av) ** 2))
    zw = one_minus_inner(z, w)
    za = one_minus_inner(z, av)
    aw = np.conj(one_minus_inner(w, av))  # 1 - <a, w>
    rhs = aa * zw / (za * aw)
    res = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    quotient = lhs / zw
    factor = aa * (1.0 / za) * np.conj(1.0 / one_minus_inner(w, av))
    fres = float(np.max(np.abs(quotient - factor) / np.abs(factor)))
    return AutomorphismCheck(res <= tol and fres <= tol, res, fres, trials)


# ---------------------------------------------------------------------------
# JSON


def map_from_json(obj, path="$") -> HoloMap:
    name = require(obj, "map", path)
    p = obj.get("params", {})
    pp = f"{path}.params"
    dom = lambda key: _domain(require(p, key, pp), f"{pp}.{key}")  # noqa: E731
    try:
        if name == "identity":
            return Identity(dom("domain"))
        if name == "constant":
            return ConstantMap(dec_vector(require(p, "value", pp), f"{pp}.value"), dom("source"), dom("target"))
        if name == "mobius_disc":
            return MobiusDisc(dec_complex(require(p, "a", pp), f"{pp}.a"), float(p.get("theta", 0.0)))
        if name == "ball_automorphism":
            return BallAutomorphism(dec_vector(require(p, "a", pp), f"{pp}.a"))
        if name == "coordinate_wise":
            facs = require(p, "factors", pp)
            if not isinstance(facs, list):
                raise ConfigError("expected a list of maps", f"{pp}.factors")
            factors = [map_from_json(f, f"{pp}.factors[{i}]") for i, f in enumerate(facs)]
            return CoordinateWise(factors, p.get("permutation"))
        if name == "polynomial":
            source, target = dom("source"), dom("target")
            tab = require(p, "table", pp)
            if not isinstance(tab, list):
                raise ConfigError("expected one term list per output coordinate", f"{pp}.table")
            table = [_terms_from_json(t, source.dimension, f"{pp}.table[{i}]") for i, t in enumerate(tab)]
            return PolynomialMap(table, source, target)
        if name == "scalar_times_identity":
            return ScalarTimesIdentity(func_from_json(require(p, "g", pp), f"{pp}.g"))
        if name == "diagonal_embed":
            return DiagonalEmbed()
        if name == "compose":
            return Compose(map_from_json(require(p, "outer", pp), f"{pp}.outer"),
                           map_from_json(require(p, "inner", pp), f"{pp}.inner"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from exc
    raise ConfigError(f"unknown map {name!r}", f"{path}.map")


def func_from_json(obj, path="$") -> HoloFunc:
    name = require(obj, "func", path)
    p = obj.get("params", {})
    pp = f"{path}.params"
    dom = lambda: _domain(require(p, "domain", pp), f"{pp}.domain")  # noqa: E731
    try:
        if name == "constant":
            return ConstantFunc(dec_complex(require(p, "value", pp), f"{pp}.value"), dom())
        if name == "coordinate":
            return CoordinateFunc(int(require(p, "index", pp)), dom())
        if name == "polynomial":
            d = dom()
            return PolynomialFunc(_terms_from_json(require(p, "terms", pp), d.dimension, f"{pp}.terms"), d)
        if name == "inner_product":
            return InnerProductFunc(dec_vector(require(p, "a", pp), f"{pp}.a"), dom())
        if name == "mobius":
            return MobiusFunc(dec_complex(require(p, "a", pp), f"{pp}.a"), float(p.get("theta", 0.0)),
                              int(p.get("index", 0)), dom())
        if name in ("sum", "product"):
            cls = SumFunc if name == "sum" else ProductFunc
            return cls(func_from_json(require(p, "left", pp), f"{pp}.left"),
                       func_from_json(require(p, "right", pp), f"{pp}.right"))
        if name == "quotient":
            return QuotientFunc(func_from_json(require(p, "numerator", pp), f"{pp}.numerator"),
                                func_from_json(require(p, "denominator", pp), f"{pp}.denominator"))
        if name == "compose":
            return ComposedFunc(func_from_json(require(p, "func", pp), f"{pp}.func"),
                                map_from_json(require(p, "inner", pp), f"{pp}.inner"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from exc
    raise ConfigError(f"unknown function {name!r}", f"{path}.func")


def _domain(text, path):
    if not isinstance(text, str):
        raise ConfigError("expected a domain tag string", path)
    try:
        return DomainTag.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from exc
