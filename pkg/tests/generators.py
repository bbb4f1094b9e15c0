"""Random domains, maps, functions and kernel trees for property tests.

Everything is driven by a numpy Generator so the acceptance suite can replay
the same corpus; hypothesis strategies wrap these with an integer seed.
"""

import numpy as np
from hypothesis import strategies as st

from rkhscert import kernel_core as kc
from rkhscert.domain import DomainTag
from rkhscert.holomap import (BallAutomorphism, Compose, ConstantMap, CoordinateWise, Identity, MobiusDisc,
                              PolynomialFunc, PolynomialMap, ScalarTimesIdentity)
from rkhscert.psd_engine import PointSet

DOMAINS = [DomainTag.disc(), DomainTag.polydisc(2), DomainTag.ball(2)]


def disc_point(rng, r_max=0.9):
    return np.sqrt(rng.uniform()) * r_max * np.exp(2j * np.pi * rng.uniform())


def random_points(rng, domain, size, r_max=0.9, label="random"):
    """Uniform-ish points within radius r_max (per coordinate or in norm)."""
    n = domain.dimension
    if domain.kind == "ball" and n > 1:
        g = rng.normal(size=(size, n)) + 1j * rng.normal(size=(size, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        z = r_max * rng.uniform(size=size)[:, None] ** (1 / (2 * n)) * g
    else:
        z = np.array([[disc_point(rng, r_max) for _ in range(n)] for _ in range(size)])
    return PointSet(z, domain, label)


def random_polynomial(rng, domain, degree=2, radius=0.9):
    """sum |c| <= radius keeps |p| < 1 on the closed domain."""
    n = domain.dimension
    exps = [e for e in np.ndindex(*([degree + 1] * n)) if sum(e) <= degree]
    c = rng.normal(size=len(exps)) + 1j * rng.normal(size=len(exps))
    c *= radius / np.sum(np.abs(c))
    return PolynomialFunc({tuple(int(v) for v in e): complex(v) for e, v in zip(exps, c)}, domain)


def random_self_map(rng, domain, depth=0):
    n = domain.dimension
    choice = rng.integers(0, 4)
    if choice == 0:
        return Identity(domain)
    if choice == 1:
        v = random_points(rng, domain, 1, 0.8).coords[0]
        return ConstantMap(tuple(v), domain, domain)
    if choice == 2:
        if domain.kind == "ball" and n > 1:
            return BallAutomorphism(tuple(random_points(rng, domain, 1, 0.8).coords[0]))
        if n == 1:
            return MobiusDisc(disc_point(rng, 0.8), float(rng.uniform(0, 2 * np.pi)))
        return CoordinateWise([MobiusDisc(disc_point(rng, 0.8), float(rng.uniform(0, 2 * np.pi)))
                               for _ in range(n)], tuple(rng.permutation(n)))
    if depth < 1 and n > 0:
        return Compose(random_self_map(rng, domain, depth + 1), random_self_map(rng, domain, depth + 1))
    if domain.kind == "ball" and n > 1:
        return ScalarTimesIdentity(random_polynomial(rng, domain, 1, 0.9))
    table = [{k: v for k, v in random_polynomial(rng, domain, 2, 0.9 / np.sqrt(n)).terms.items()}
             for _ in range(n)]
    return PolynomialMap(table, domain, domain)


def builtin_kernels(domain):
    n = domain.dimension
    if domain.kind == "ball" and n > 1:
        return [kc.HardyBall(n), kc.BergmanBall(n, 0.0), kc.BergmanBall(n, 1.5)]
    out = [kc.HardyPolydisc(n), kc.BergmanPolydisc(n, 0.0), kc.BergmanPolydisc(n, -0.5),
           kc.SeriesBergmanStar(n, 0.5, 200)]
    if n == 1:
        out += [kc.HardyDisc(), kc.HardyBall(1), kc.BergmanBall(1, 0.5)]
    return out


def random_tree(rng, domain, depth=3):
    """Random kernel built from builtins with closure-preserving combinators only."""
    leaves = [k for k in builtin_kernels(domain) if not isinstance(k, kc.SeriesBergmanStar)]
    if depth == 0 or rng.uniform() < 0.25:
        if rng.uniform() < 0.2:
            return kc.rank_one(random_polynomial(rng, domain, 2, 1.5))
        return leaves[rng.integers(len(leaves))]
    op = rng.integers(0, 5)
    if op == 0:
        return kc.sum(random_tree(rng, domain, depth - 1), random_tree(rng, domain, depth - 1))
    if op == 1:
        return kc.product(random_tree(rng, domain, depth - 1), random_tree(rng, domain, depth - 1))
    if op == 2:
        return kc.scale(float(rng.uniform(0, 3)), random_tree(rng, domain, depth - 1))
    phi = random_self_map(rng, domain)
    if op == 3:
        return kc.pullback(random_tree(rng, domain, depth - 1), phi)
    psi = random_polynomial(rng, domain, 2, 2.0)
    return kc.weighted_pullback(random_tree(rng, domain, depth - 1), phi, psi)


def random_disc_map(rng):
    """A map of the disc the matrix oracle can expand."""
    kind = rng.integers(0, 4)
    if kind == 0:
        return MobiusDisc(disc_point(rng, 0.8), float(rng.uniform(0, 2 * np.pi)))
    if kind == 1:
        return ConstantMap((disc_point(rng, 0.8),), DomainTag.disc(), DomainTag.disc())
    if kind == 2:
        p = random_polynomial(rng, DomainTag.disc(), 3, 0.9)
        return PolynomialMap([p.terms], DomainTag.disc(), DomainTag.disc())
    return Compose(MobiusDisc(disc_point(rng, 0.6)), MobiusDisc(disc_point(rng, 0.6), 1.0))


seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
domains = st.sampled_from(DOMAINS)


@st.composite
def trees(draw, depth=3):
    dom = draw(domains)
    rng = np.random.default_rng(draw(seeds))
    return random_tree(rng, dom, depth), random_points(rng, dom, draw(st.integers(2, 16)))


@st.composite
def maps_with_points(draw):
    dom = draw(domains)
    rng = np.random.default_rng(draw(seeds))
    return random_self_map(rng, dom), random_points(rng, dom, draw(st.integers(2, 12)))

