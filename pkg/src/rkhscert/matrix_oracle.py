"""Brute-force oracle on H^2(D): C_phi as a truncated matrix in the monomial basis.

Column j of the matrix holds the Taylor coefficients of phi^j. Its largest
singular value lower-bounds ||C_phi|| and increases with the truncation
orders; the conjugate transpose acting on kernel coefficient vectors checks
the adjoint action C_phi^* K_x = K_{phi(x)} directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import DomainTag
from .holomap import (Compose, ConstantMap, CoordinateWise, HoloMap, Identity, MobiusDisc,
                      PolynomialMap)

DEFAULT_SCHEDULE = (50, 100, 200, 400)


class UnsupportedMapError(TypeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, value):
        super().__init__(message)
        self.value = value


@dataclass(frozen=True, eq=False)
class TaylorSeries:
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 1 or not c.size:
            raise ValueError("coefficients must be a nonempty vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("Taylor coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def truncation(self):
        return len(self.coefficients) - 1

    @classmethod
    def constant(cls, value, N):
        c = np.zeros(N + 1, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, N):
        c = np.zeros(N + 1, dtype=complex)
        if N >= 1:
            c[1] = 1
        return cls(c)

    def _coerce(self, other):
        if isinstance(other, TaylorSeries):
            if other.truncation != self.truncation:
                raise ValueError("series truncations differ")
            return other.coefficients
        return TaylorSeries.constant(other, self.truncation).coefficients

    def __add__(self, other):
        return TaylorSeries(self.coefficients + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return TaylorSeries(self.coefficients - self._coerce(other))

    def __rsub__(self, other):
        return TaylorSeries(self._coerce(other) - self.coefficients)

    def __neg__(self):
        return TaylorSeries(-self.coefficients)

    def __mul__(self, other):
        if not isinstance(other, TaylorSeries):
            return TaylorSeries(self.coefficients * complex(other))
        n = self.truncation + 1
        return TaylorSeries(np.convolve(self.coefficients, self._coerce(other))[:n])

    __rmul__ = __mul__

    def reciprocal(self):
        """1/f for f(0) != 0, truncated at the same degree."""
        a = self.coefficients
        if abs(a[0]) == 0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        b = np.zeros_like(a)
        b[0] = 1 / a[0]
        for k in range(1, len(a)):
            b[k] = -np.dot(a[1:k + 1], b[k - 1::-1]) / a[0]
        return TaylorSeries(b)

    def __call__(self, z):
        acc = np.zeros(np.shape(z), dtype=complex)
        for c in self.coefficients[::-1]:
            acc = acc * z + c
        return acc


def _is_disc_map(phi):
    return phi.source.dimension == 1 and phi.target.dimension == 1


def _substitute(phi: HoloMap, s: TaylorSeries) -> TaylorSeries:
    """Series of phi(s(z)) for a series s with |s| < 1 on the disc."""
    N = s.truncation
    if isinstance(phi, Identity):
        return s
    if isinstance(phi, ConstantMap):
        return TaylorSeries.constant(phi.value[0], N)
    if isinstance(phi, MobiusDisc):
        a = phi.a
        return np.exp(1j * phi.theta) * (a - s) * (1 - np.conj(a) * s).reciprocal()
    if isinstance(phi, PolynomialMap):
        terms = phi.table[0]
        deg = max(e[0] for e in terms) if terms else 0
        acc = TaylorSeries.constant(0, N)
        for k in range(deg, -1, -1):
            acc = acc * s + terms.get((k,), 0)
        return acc
    if isinstance(phi, CoordinateWise) and len(phi.factors) == 1:
        return _substitute(phi.factors[0], s)
    if isinstance(phi, Compose):
        return _substitute(phi.outer, _substitute(phi.inner, s))
    raise UnsupportedMapError(f"no Taylor expansion for map {phi.name!r}")


def supports(phi: HoloMap) -> bool:
    if not _is_disc_map(phi):
        return False
    try:
        _substitute(phi, TaylorSeries.variable(2))
    except UnsupportedMapError:
        return False
    return True


def taylor_of_map(phi: HoloMap, N: int) -> TaylorSeries:
    """Taylor coefficients of a self-map of the disc up to degree N."""
    if not _is_disc_map(phi):
        raise UnsupportedMapError("the matrix oracle handles maps of the disc only")
    return _substitute(phi, TaylorSeries.variable(N))


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    matrix: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape

    def column_norms(self):
        return np.linalg.norm(self.matrix, axis=0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "re", "im"])
            rows, cols = np.nonzero(self.matrix)
            for i, j in zip(rows, cols):
                v = self.matrix[i, j]
                w.writerow([int(i), int(j), repr(float(v.real)), repr(float(v.imag))])


def truncated_operator(phi: HoloMap, N_rows: int, N_cols: int) -> TruncatedOperator:
    """(N_rows+1) x (N_cols+1) matrix whose column j is phi^j truncated at N_rows."""
    s = taylor_of_map(phi, N_rows)
    m = np.zeros((N_rows + 1, N_cols + 1), dtype=complex)
    p = TaylorSeries.constant(1, N_rows)
    for j in range(N_cols + 1):
        m[:, j] = p.coefficients
        p = p * s
    return TruncatedOperator(m)


def _power_iteration(m, x, tol, max_iter):
    # iterate on the Gram matrix G = M*M; one matvec per step
    g = m.conj().T @ m
    g = (g + g.conj().T) / 2
    x = x / np.linalg.norm(x)
    gx = g @ x
    lam = float(np.vdot(x, gx).real)
    for it in range(1, max_iter + 1):
        ny = np.linalg.norm(gx)
        if ny == 0:
            return 0.0, x, it
        x = gx / ny
        gx = g @ x
        new = float(np.vdot(x, gx).real)
        if abs(new - lam) <= tol * new:
            return new, x, it
        lam = new
    raise ConvergenceError(f"power iteration stalled after {max_iter} iterations "
                           f"(Rayleigh quotient {lam:.12g})", np.sqrt(lam))


def truncation_norm(op: TruncatedOperator, tol=1e-10, max_iter=100_000, seed=0, start=None) -> float:
    """Largest singular value of the truncated matrix by power iteration on M*M.

    ``start`` (padded with zeros if shorter) warm-starts the iteration; the
    Rayleigh quotients of power iterates of a PSD matrix never decrease, so a
    warm start from a smaller truncation keeps estimates monotone.
    """
    value, _ = _top_singular(op.matrix, tol, max_iter, seed, start)
    return value


def _top_singular(m, tol, max_iter, seed, start):
    ncols = m.shape[1]
    if start is None:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=ncols) + 1j * rng.normal(size=ncols)
    else:
        x = np.zeros(ncols, dtype=complex)
        x[:len(start)] = start[:ncols]
    lam, x, _ = _power_iteration(m, x, tol, max_iter)
    return float(np.sqrt(lam)), x


def truncation_schedule(phi: HoloMap, schedule=DEFAULT_SCHEDULE, tol=1e-10, max_iter=100_000, seed=0):
    """Norm estimates along increasing square truncations.

    Returns a list of (N, norm) pairs; each run warm-starts from the previous
    top singular vector. The last increment is the usual error proxy.
    """
    out, vec = [], None
    for N in schedule:
        m = truncated_operator(phi, N, N).matrix
        value, vec = _top_singular(m, tol, max_iter, seed, vec)
        out.append((int(N), value))
    return out


def adjoint_action_check(phi: HoloMap, x: complex, N: int) -> float:
    """||M^H k_x - k_{phi(x)}||_2 with k_w = (conj(w)^j)_{j <= N}."""
    x = complex(x)
    if abs(x) >= 1:
        raise ValueError("x must lie in the open disc")
    m = truncated_operator(phi, N, N).matrix
    j = np.arange(N + 1)
    kx = np.conj(x) ** j
    y = complex(phi(np.array([[x]]))[0, 0])
    return float(np.linalg.norm(m.conj().T @ kx - np.conj(y) ** j))


def kernel_section_ratio(phi: HoloMap, x: complex, N: int) -> float:
    """||P C_phi P K_w|| / ||P K_w|| at w = phi(x), P the degree-N truncation.

    A finite-section stand-in for ||C_phi K_{phi(x)}|| / ||K_{phi(x)}||; it
    never exceeds ||C_phi||.
    """
    w = complex(phi(np.array([[complex(x)]]))[0, 0])
    m = truncated_operator(phi, N, N).matrix
    kw = np.conj(w) ** np.arange(N + 1)
    return float(np.linalg.norm(m @ kw) / np.linalg.norm(kw))


def kernel_section_ratio_max(phi: HoloMap, xs, N: int) -> float:
    m = truncated_operator(phi, N, N).matrix
    ws = phi(np.asarray(xs, dtype=complex).reshape(-1, 1))[:, 0]
    kw = np.conj(ws)[None, :] ** np.arange(N + 1)[:, None]
    return float(np.max(np.linalg.norm(m @ kw, axis=0) / np.linalg.norm(kw, axis=0)))
