"""Point sampling, Gram assembly, Hermitian eigensolves and PSD verdicts."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .domain import BOUNDARY_MARGIN, DomainError, DomainTag, Point
from .kernel_core import KernelEvaluationError, KernelExpr

DEFAULT_PSD_TOL = 1e-9
DUPLICATE_RADIUS = 1e-10
GRID_RADIUS = 0.95
# Boundary-biased radii are 1 - 0.5**(1+G), G ~ Exponential(mean), capped at
# 1 - BOUNDARY_CAP.
BOUNDARY_CAP = 1e-8
BOUNDARY_G_MEAN = 6.0
GRAM_BLOCK = 256

STRATEGIES = ("grid", "uniform_random", "boundary_biased")


class EigenError(np.linalg.LinAlgError):
    pass


# ---------------------------------------------------------------------------
# point sets


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered points of one domain, stored as an (m, n) complex array."""

    coords: np.ndarray
    domain: DomainTag
    label: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        z = np.array(self.coords, dtype=complex)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] == 0:
            raise ValueError("a point set must be nonempty")
        self.domain.check(z, "point")
        if len(z) > 1:
            tree = cKDTree(np.concatenate([z.real, z.imag], axis=1))
            pair = tree.query_pairs(DUPLICATE_RADIUS, output_type="ndarray")
            if len(pair):
                i, j = (int(v) for v in pair[0])
                raise ValueError(f"points {i} and {j} of {self.label or 'point set'} are closer "
                                 f"than {DUPLICATE_RADIUS:g}")
        z.setflags(write=False)
        object.__setattr__(self, "coords", z)

    def __len__(self):
        return self.coords.shape[0]

    def __iter__(self):
        return (Point(tuple(row), self.domain) for row in self.coords)

    def __getitem__(self, i) -> Point:
        return Point(tuple(self.coords[i]), self.domain)

    def prefix(self, size, label=None) -> "PointSet":
        return PointSet(self.coords[:size], self.domain, label or f"{self.label}[:{size}]", self.seed)

    def extend(self, other: "PointSet", label=None) -> "PointSet":
        if not other.domain.same_set(self.domain):
            raise DomainError("cannot join point sets of different domains")
        return PointSet(np.vstack([self.coords, other.coords]), self.domain,
                        label or self.label, self.seed)

    @classmethod
    def of(cls, domain, points, label="", seed=None):
        z = np.array([np.atleast_1d(p.coords if isinstance(p, Point) else p) for p in points], dtype=complex)
        return cls(z, domain, label, seed)

    def to_csv(self, path):
        n = self.domain.dimension
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"#domain={self.domain}", f"seed={'' if self.seed is None else self.seed}",
                        f"label={self.label}"])
            w.writerow([f"{part}_z{i + 1}" for i in range(n) for part in ("re", "im")])
            for row in self.coords:
                w.writerow([repr(float(v)) for c in row for v in (c.real, c.imag)])

    @classmethod
    def from_csv(cls, path) -> "PointSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3:
            raise ValueError(f"{path}: expected a header, a column row and at least one point")
        meta = {}
        for cell in rows[0]:
            key, _, val = cell.lstrip("#").partition("=")
            meta[key.strip()] = val.strip()
        if "domain" not in meta:
            raise ValueError(f"{path}: header row lacks the domain tag")
        domain = DomainTag.parse(meta["domain"])
        seed = int(meta["seed"]) if meta.get("seed") else None
        data = np.array([[float(v) for v in r] for r in rows[2:] if r], dtype=float)
        if data.shape[1] != 2 * domain.dimension:
            raise ValueError(f"{path}: expected {2 * domain.dimension} columns for {domain}")
        return cls(data[:, 0::2] + 1j * data[:, 1::2], domain, meta.get("label", ""), seed)


def _disc_uniform(rng, size):
    r = np.sqrt(rng.uniform(size=size))
    return r * np.exp(2j * np.pi * rng.uniform(size=size))


def _boundary_radius(rng, size, cap):
    g = rng.exponential(BOUNDARY_G_MEAN, size=size)
    return np.minimum(1.0 - 0.5 ** (1.0 + g), 1.0 - cap)


def _sphere(rng, n, size):
    g = rng.normal(size=(size, n)) + 1j * rng.normal(size=(size, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _disc_grid(size):
    k = np.arange(size)
    r = GRID_RADIUS * np.sqrt((k + 0.5) / size)
    golden = np.pi * (3.0 - math.sqrt(5.0))
    return r * np.exp(1j * golden * k)


def _ball_grid(n, size):
    per_axis = 2
    while True:
        axis = np.linspace(-GRID_RADIUS, GRID_RADIUS, per_axis)
        pts = np.array(list(itertools.product(axis, repeat=2 * n)))
        norms = np.linalg.norm(pts, axis=1)
        keep = norms <= GRID_RADIUS + 1e-12
        if keep.sum() >= size:
            pts, norms = pts[keep], norms[keep]
            order = np.lexsort(tuple(pts.T[::-1]) + (np.round(norms, 12),))
            pts = pts[order[:size]]
            return pts[:, 0::2] + 1j * pts[:, 1::2]
        per_axis += 1


def sample_points(domain: DomainTag, strategy: str, size: int, seed: int = 0,
                  cap: float = BOUNDARY_CAP, label=None) -> PointSet:
    """Sample ``size`` points of ``domain``.

    ``grid`` is deterministic (Vogel spiral on the disc, tensor products of it
    on the polydisc, a filtered real lattice on the ball, all within radius
    0.95). ``uniform_random`` is uniform in volume. ``boundary_biased`` draws
    radius ``1 - 0.5**(1+G)`` with exponential G, capped at ``1 - cap``; on the
    polydisc one random coordinate per point is pushed toward the circle.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}; choose from {STRATEGIES}")
    rng = np.random.default_rng(seed)
    n = domain.dimension
    if strategy == "grid":
        if domain.kind == "ball" and n > 1:
            z = _ball_grid(n, size)
        else:
            m = int(math.ceil(size ** (1.0 / n) - 1e-9))
            base = _disc_grid(m)
            z = np.array(list(itertools.islice(itertools.product(base, repeat=n), size)))
    elif strategy == "uniform_random":
        if domain.kind == "ball":
            r = rng.uniform(size=size) ** (1.0 / (2 * n))
            z = r[:, None] * _sphere(rng, n, size)
        else:
            z = np.stack([_disc_uniform(rng, size) for _ in range(n)], axis=1)
    else:
        if domain.kind == "ball":
            z = _boundary_radius(rng, size, cap)[:, None] * _sphere(rng, n, size)
        else:
            z = np.stack([_disc_uniform(rng, size) for _ in range(n)], axis=1)
            which = rng.integers(0, n, size=size)
            theta = 2 * np.pi * rng.uniform(size=size)
            z[np.arange(size), which] = _boundary_radius(rng, size, cap) * np.exp(1j * theta)
    return PointSet(z.reshape(size, n), domain, label or f"{strategy}-{size}", seed)


# ---------------------------------------------------------------------------
# Hermitian matrices


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    entries: np.ndarray
    hermiticity_defect: float = 0.0

    @classmethod
    def from_array(cls, a) -> "HermitianMatrix":
        """Symmetrise ``(A + A*)/2`` and record max |A_ij - conj(A_ji)|."""
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("a Hermitian matrix must be square")
        defect = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
        h = (a + a.conj().T) / 2
        h.setflags(write=False)
        return cls(h, defect)

    @property
    def order(self):
        return self.entries.shape[0]

    @property
    def scale(self):
        """|trace| / order, the reference magnitude for relative tolerances."""
        return abs(float(np.trace(self.entries).real)) / self.order

    def quadratic_form(self, c) -> complex:
        """sum_ij c_i conj(c_j) A_ij."""
        c = np.asarray(c, dtype=complex)
        return complex(c @ self.entries @ np.conj(c))


def eig_hermitian(a: HermitianMatrix):
    """Ascending eigenvalues and orthonormal eigenvectors (as columns).

    Backed by LAPACK ``heevd``; the residual contract
    ||A v - lambda v|| <= 1e-9 * order * ||A||_F and orthonormality to 1e-9
    are verified before returning.
    """
    h = a.entries
    n = h.shape[0]
    if n < 1:
        raise ValueError("matrix order must be >= 1")
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"Hermitian eigensolve failed to converge: {exc}") from exc
    fro = float(np.linalg.norm(h))
    resid = float(np.max(np.linalg.norm(h @ v - v * w, axis=0))) if n else 0.0
    if resid > 1e-9 * n * max(fro, np.finfo(float).tiny):
        raise EigenError(f"eigen residual {resid:.3g} violates the contract (||A||_F = {fro:.3g})")
    ortho = float(np.max(np.abs(v.conj().T @ v - np.eye(n))))
    if ortho > 1e-9:
        raise EigenError(f"eigenvectors not orthonormal (defect {ortho:.3g})")
    return w, v


# ---------------------------------------------------------------------------
# Gram matrices and verdicts


def _gram_block(k, z, lo, hi):
    try:
        return k.matrix(z[lo:hi], z)
    except KernelEvaluationError as exc:
        raise type(exc)(f"{exc} (row block {lo}:{hi})") from exc


def gram(k: KernelExpr, pts: PointSet, executor=None) -> HermitianMatrix:
    """[K(x_i, x_j)] over ``pts``, assembled in independent row blocks.

    Pass a ``concurrent.futures`` executor to assemble blocks in parallel.
    """
    if not pts.domain.same_set(k.domain):
        raise DomainError(f"point set on {pts.domain} but kernel lives on {k.domain}")
    z = pts.coords
    spans = [(lo, min(lo + GRAM_BLOCK, len(z))) for lo in range(0, len(z), GRAM_BLOCK)]
    mapper = executor.map if executor is not None else map
    try:
        blocks = list(mapper(lambda s: _gram_block(k, z, *s), spans))
    except KernelEvaluationError as exc:
        raise type(exc)(f"{exc} in point set {pts.label!r}") from exc
    return HermitianMatrix.from_array(np.vstack(blocks))


@dataclass(frozen=True, eq=False)
class PsdVerdict:
    min_eigenvalue: float
    scale: float
    tolerance: float
    verdict: str
    # explicit coefficients c with sum c_i conj(c_j) A_ij < 0 (not_psd only)
    witness: Optional[np.ndarray] = field(default=None, repr=False)
    witness_value: Optional[float] = None

    def to_json(self):
        return {"min_eigenvalue": self.min_eigenvalue, "scale": self.scale,
                "tolerance": self.tolerance, "verdict": self.verdict,
                "witness_value": self.witness_value}


def classify(min_eigenvalue, scale, tolerance) -> str:
    if min_eigenvalue >= -tolerance * scale:
        return "psd"
    if min_eigenvalue < -10 * tolerance * scale:
        return "not_psd"
    return "inconclusive"


def psd_verdict(a: HermitianMatrix, tolerance=DEFAULT_PSD_TOL) -> PsdVerdict:
    w, v = eig_hermitian(a)
    lam = float(w[0])
    scale = a.scale
    verdict = classify(lam, scale, tolerance)
    if verdict != "not_psd":
        return PsdVerdict(lam, scale, tolerance, verdict)
    c = np.conj(v[:, 0])
    q = a.quadratic_form(c).real
    if not q < 0:
        return PsdVerdict(lam, scale, tolerance, "inconclusive")
    return PsdVerdict(lam, scale, tolerance, verdict, c, q)


def psd_check(k: KernelExpr, pts: PointSet, tolerance=DEFAULT_PSD_TOL, screen=False) -> PsdVerdict:
    """PSD verdict for the Gram matrix of ``k`` on ``pts``.

    With ``screen=True`` a pivoted Cholesky probe runs first; when it finds the
    matrix positive definite only eigenvalues (no vectors) are computed.
    """
    a = gram(k, pts)
    if screen and cholesky_psd_probe(a, tolerance) == "psd":
        lam = float(np.linalg.eigvalsh(a.entries)[0])
        return PsdVerdict(lam, a.scale, tolerance, classify(lam, a.scale, tolerance))
    return psd_verdict(a, tolerance)


def cholesky_psd_probe(a: HermitianMatrix, tolerance=DEFAULT_PSD_TOL) -> str:
    """Cheap screen by diagonally pivoted Cholesky.

    ``psd`` when every pivot exceeds tolerance * scale (numerically positive
    definite), ``not_psd`` when a Schur complement shows a diagonal entry
    below -10 * tolerance * scale, ``inconclusive`` when the factorisation
    stalls on tiny pivots.
    """
    s = np.array(a.entries, dtype=complex)
    n = s.shape[0]
    thresh = tolerance * max(a.scale, np.finfo(float).tiny)
    active = np.ones(n, dtype=bool)
    for _ in range(n):
        d = np.where(active, s.diagonal().real, np.nan)
        if np.nanmin(d) < -10 * thresh:
            return "not_psd"
        p = int(np.nanargmax(d))
        if d[p] <= thresh:
            return "inconclusive"
        col = s[:, p] / math.sqrt(d[p])
        active[p] = False
        col = np.where(active, col, 0)
        s = s - np.outer(col, np.conj(col))
    return "psd"
