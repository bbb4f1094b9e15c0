"""Domains (disc, polydisc, ball), points, and accurate near-boundary arithmetic."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

# Points must sit at least this far inside the domain (membership slack).
BOUNDARY_MARGIN = 1e-12


class DomainError(ValueError):
    """A point or map image is not strictly inside its domain."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class DomainTag:
    kind: str
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in ("disc", "polydisc", "ball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("domain dimension must be >= 1")
        if self.kind == "disc" and self.dimension != 1:
            raise ValueError("the disc has dimension 1")

    @classmethod
    def disc(cls):
        return cls("disc", 1)

    @classmethod
    def polydisc(cls, n):
        return cls("polydisc", int(n))

    @classmethod
    def ball(cls, n):
        return cls("ball", int(n))

    @classmethod
    def parse(cls, text: str) -> "DomainTag":
        """Parse ``disc``, ``polydisc(2)`` or ``ball(3)``."""
        text = text.strip()
        if text == "disc":
            return cls.disc()
        m = re.fullmatch(r"(polydisc|ball)\((\d+)\)", text)
        if not m:
            raise ValueError(f"cannot parse domain tag {text!r}")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self):
        return "disc" if self.kind == "disc" else f"{self.kind}({self.dimension})"

    def same_set(self, other: "DomainTag") -> bool:
        # disc, polydisc(1) and ball(1) are all the unit disc
        if self.dimension != other.dimension:
            return False
        return self.dimension == 1 or self.kind == other.kind

    def slack(self, coords) -> np.ndarray:
        """Distance-like membership slack; positive inside the domain.

        Accepts an array of shape ``(..., n)``. Polydisc slack is
        ``1 - max|z_i|``, ball slack is ``1 - |z|^2``.
        """
        z = np.asarray(coords)
        if self.kind == "ball":
            return 1.0 - np.sum(np.abs(z) ** 2, axis=-1)
        return 1.0 - np.max(np.abs(z), axis=-1)

    def contains(self, coords, margin=BOUNDARY_MARGIN) -> np.ndarray:
        return self.slack(coords) >= margin

    def check(self, coords, what="point"):
        z = np.asarray(coords, dtype=complex)
        if z.shape[-1] != self.dimension:
            raise DomainError(
                f"{what} has {z.shape[-1]} coordinates, domain {self} needs {self.dimension}"
            )
        bad = np.ravel(~self.contains(z))
        if np.any(bad):
            offending = z.reshape(-1, self.dimension)[int(np.argmax(bad))]
            raise DomainError(
                f"{what} {_fmt(offending)} is not strictly inside {self}", point=offending
            )
        return z

    def to_json(self):
        return str(self)


@dataclass(frozen=True)
class Point:
    coords: tuple
    domain: DomainTag

    def __post_init__(self):
        coords = tuple(complex(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)
        self.domain.check(np.array(coords, dtype=complex))

    @classmethod
    def of(cls, domain: DomainTag, *coords):
        return cls(tuple(coords), domain)

    @classmethod
    def origin(cls, domain: DomainTag):
        return cls((0j,) * domain.dimension, domain)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def _fmt(z):
    return "(" + ", ".join(f"{complex(c):.6g}" for c in np.ravel(z)) + ")"


# --- error-free transformations -------------------------------------------
# 1 - <z, w> loses all relative precision near the boundary diagonal when
# evaluated naively; the kernels below divide by it, so it is evaluated with
# compensated (doubled-precision) dot products instead.

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dot2(start, pairs):
    """start + sum(sign * a * b) for broadcastable float arrays, compensated."""
    s = None
    c = None
    for a, b, sign in pairs:
        p, e = _two_prod(a, b)
        if s is None:
            s = np.broadcast_to(np.asarray(start, dtype=float), p.shape)
            c = np.zeros(p.shape)
        s, e2 = _two_sum(s, sign * p)
        c = c + e2 + sign * e
    return s + c


def one_minus_inner(z, w) -> np.ndarray:
    """Return ``1 - <z, w> = 1 - sum z_i conj(w_i)`` over the last axis.

    ``z`` and ``w`` broadcast against each other. The result carries close to
    full relative precision even when ``<z, w>`` is within 1e-12 of 1.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    zr, zi, wr, wi = z.real, z.imag, w.real, w.imag
    n = max(z.shape[-1], w.shape[-1])
    re_pairs, im_pairs = [], []
    for k in range(n):
        a_r = zr[..., k if zr.shape[-1] > 1 else 0]
        a_i = zi[..., k if zi.shape[-1] > 1 else 0]
        b_r = wr[..., k if wr.shape[-1] > 1 else 0]
        b_i = wi[..., k if wi.shape[-1] > 1 else 0]
        # Re z conj(w) = zr wr + zi wi ; Im z conj(w) = zi wr - zr wi
        re_pairs += [(a_r, b_r, -1.0), (a_i, b_i, -1.0)]
        im_pairs += [(a_i, b_r, -1.0), (a_r, b_i, 1.0)]
    return _dot2(1.0, re_pairs) + 1j * _dot2(0.0, im_pairs)


def inner(z, w) -> np.ndarray:
    """<z, w> = sum z_i conj(w_i) over the last axis."""
    return np.sum(np.asarray(z) * np.conj(np.asarray(w)), axis=-1)
