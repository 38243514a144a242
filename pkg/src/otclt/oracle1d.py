"""Ground truth on the real line: quantile coupling, monotone map, potentials.

Everything here is computed from CDFs and quantile functions and never calls
the network simplex, so it can serve as an independent check of the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .costs import CostSpec


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution1D:
    """A law on R given by its CDF and left-continuous quantile function.

    ``kind`` is one of ``uniform`` (a, b), ``gaussian`` (mu, sigma) or
    ``empirical`` (atoms with weights; a single atom is a point mass).
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    atoms: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.a < self.b:
                raise OracleError("uniform law needs a < b")
        elif self.kind == "gaussian":
            if not self.b > 0:
                raise OracleError("gaussian law needs sigma > 0")
        elif self.kind == "empirical":
            x = np.asarray(self.atoms, dtype=float).reshape(-1)
            if x.size == 0:
                raise OracleError("empirical law needs at least one atom")
            w = (np.full(x.size, 1.0 / x.size) if self.weights is None
                 else np.asarray(self.weights, dtype=float).reshape(-1))
            if x.size == 0 or w.size != x.size or np.any(w <= 0):
                raise OracleError("empirical law needs atoms with positive weights")
            order = np.argsort(x, kind="stable")
            object.__setattr__(self, "atoms", x[order])
            object.__setattr__(self, "weights", w[order] / w.sum())
        else:
            raise OracleError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def uniform(cls, a: float, b: float) -> "Distribution1D":
        return cls("uniform", float(a), float(b))

    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> "Distribution1D":
        return cls("gaussian", float(mu), float(sigma))

    @classmethod
    def empirical(cls, atoms, weights=None) -> "Distribution1D":
        return cls("empirical", atoms=np.asarray(atoms, dtype=float), weights=weights)

    @classmethod
    def point_mass(cls, x: float) -> "Distribution1D":
        return cls.empirical([float(x)])

    @property
    def is_discrete(self) -> bool:
        return self.kind == "empirical"

    @property
    def is_atom(self) -> bool:
        return self.kind == "empirical" and self.atoms.size == 1

    @property
    def cum_weights(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def support(self):
        if self.kind == "uniform":
            return self.a, self.b
        if self.kind == "gaussian":
            return -np.inf, np.inf
        return float(self.atoms[0]), float(self.atoms[-1])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        if self.kind == "gaussian":
            return special.ndtr((x - self.a) / self.b)
        idx = np.searchsorted(self.atoms, x, side="right")
        cw = np.concatenate([[0.0], self.cum_weights])
        return np.minimum(cw[idx], 1.0)

    def cdf_left(self, x):
        """``F(x-)``; differs from :meth:`cdf` only at atoms."""
        if self.kind != "empirical":
            return self.cdf(x)
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.atoms, x, side="left")
        cw = np.concatenate([[0.0], self.cum_weights])
        return cw[idx]

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        if self.kind == "gaussian":
            return self.a + self.b * special.ndtri(u)
        idx = np.searchsorted(self.cum_weights, u, side="left")
        return self.atoms[np.clip(idx, 0, self.atoms.size - 1)]

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "gaussian":
            return self.a
        return float(self.weights @ self.atoms)


def _check_spec(spec: CostSpec):
    if spec.d != 1:
        raise OracleError("the 1-D oracle needs a cost of dimension 1")


def _h(spec, v):
    return spec.h_of(np.asarray(v, dtype=float)[..., None])


def _dh(spec, v):
    return spec.grad_of(np.asarray(v, dtype=float)[..., None])[..., 0]


_GL_CACHE = {}


def _gl(k):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = np.polynomial.legendre.leggauss(k)
    return _GL_CACHE[k]


def gauss_legendre(f, lo, hi, quad_points=20, rtol=1e-10, max_level=14):
    """Composite Gauss-Legendre on ``[lo, hi]`` with panel doubling.

    ``f`` is vectorized. Stops when two successive levels agree to ``rtol``
    (or to an absolute ``rtol`` when the integral is ~0).
    """
    t, w = _gl(quad_points)
    prev = None
    for level in range(max_level + 1):
        panels = 2 ** level
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        vals = np.asarray(f(nodes), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise OracleError("non-finite integrand: the integral may diverge")
        est = float(np.sum(vals.reshape(panels, -1) * w[None, :] * half[:, None]))
        if prev is not None and abs(est - prev) <= rtol * max(abs(est), 1.0):
            return est
        prev = est
    return prev


Z_MAX = 10.0


def _quantile_z(dist: Distribution1D, z):
    if dist.kind == "gaussian":
        return dist.a + dist.b * z
    return dist.quantile(special.ndtr(z))


def _quantile_integral(g, dists, lo, hi, quad_points, rtol=1e-10, max_level=14):
    """``int_lo^hi g(F1^{-1}(u), F2^{-1}(u), ...) du`` over quantile levels.

    Gaussian quantiles blow up at 0 and 1, so such integrals are taken in
    normal-score coordinates ``u = Phi(z)`` truncated at ``|z| <= Z_MAX``.
    """
    if not any(dd.kind == "gaussian" for dd in dists):
        return gauss_legendre(lambda u: g(*[dd.quantile(u) for dd in dists]),
                              lo, hi, quad_points, rtol, max_level)
    zlo = max(float(special.ndtri(lo)), -Z_MAX)
    zhi = min(float(special.ndtri(hi)), Z_MAX)
    if zhi <= zlo:
        return 0.0
    pdf = lambda z: np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    return gauss_legendre(lambda z: g(*[_quantile_z(dd, z) for dd in dists]) * pdf(z),
                          zlo, zhi, quad_points, rtol, max_level)


def _breakpoints(*dists):
    pts = [0.0, 1.0]
    for dist in dists:
        if dist.is_discrete:
            pts.extend(np.clip(dist.cum_weights[:-1], 0.0, 1.0).tolist())
    return np.unique(pts)


def quantile_cost(spec: CostSpec, X: Distribution1D, Y: Distribution1D, quad_points: int = 20) -> float:
    """``int_0^1 h(F^{-1}(u) - G^{-1}(u)) du``: the optimal cost on the line."""
    _check_spec(spec)
    if X.is_discrete and Y.is_discrete:
        nx, ny = X.atoms.size, Y.atoms.size
        if nx == ny and np.all(X.weights == X.weights[0]) and np.all(Y.weights == Y.weights[0]):
            return float(np.mean(_h(spec, X.atoms - Y.atoms)))
        edges = _breakpoints(X, Y)
        mids = 0.5 * (edges[1:] + edges[:-1])
        lens = np.diff(edges)
        return float(np.sum(lens * _h(spec, X.quantile(mids) - Y.quantile(mids))))
    edges = _breakpoints(X, Y)
    g = lambda qx, qy: _h(spec, qx - qy)
    total = sum(_quantile_integral(g, (X, Y), lo, hi, quad_points)
                for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)
    if not np.isfinite(total):
        raise OracleError("non-finite transport cost")
    return total


def monotone_map(X: Distribution1D, Y: Distribution1D, x):
    """``T(x) = G^{-1}(F(x))``; at atoms of X the mid-quantile is used."""
    x = np.asarray(x, dtype=float)
    lo, hi = X.support()
    if np.any(x < lo) or np.any(x > hi):
        raise OracleError(f"point outside the support [{lo}, {hi}] of X")
    if Y.is_atom:
        return np.full_like(x, Y.atoms[0])
    if X.kind == "gaussian":
        return _quantile_z(Y, (x - X.a) / X.b)
    u = 0.5 * (X.cdf_left(x) + X.cdf(x))
    return Y.quantile(u)


class Potential1D:
    """``phi(x) = int_{x0}^x h'(s - T(s)) ds``, so that ``phi(x0) = 0``."""

    def __init__(self, spec: CostSpec, X: Distribution1D, Y: Distribution1D, x0: float,
                 rtol: float = 1e-9):
        _check_spec(spec)
        lo, hi = X.support()
        if not lo <= x0 <= hi:
            raise OracleError(f"anchor {x0} outside the support of X")
        self.spec, self.X, self.Y, self.x0, self.rtol = spec, X, Y, float(x0), rtol
        self._lo, self._hi = lo, hi

    def _jumps(self):
        if not hasattr(self, "_jump_cache"):
            cw = self.Y.cum_weights[:-1]
            if self.X.kind == "gaussian":
                pts = self.X.a + self.X.b * special.ndtri(cw)
            else:
                pts = self.X.quantile(cw)
            self._jump_cache = np.unique(pts)
        return self._jump_cache

    def _slope(self, s):
        s = np.asarray(s, dtype=float)
        if self.Y.is_atom:
            t = self.Y.atoms[0]
        elif self.X.kind == "gaussian":
            t = _quantile_z(self.Y, (s - self.X.a) / self.X.b)
        else:
            t = self.Y.quantile(np.clip(self.X.cdf(s), 0.0, 1.0))
        return _dh(self.spec, s - t)

    def _integral(self, a, b):
        if a == b:
            return 0.0
        if self.Y.is_atom and self.spec.kind == "power":
            return float(_h(self.spec, b - self.Y.atoms[0]) - _h(self.spec, a - self.Y.atoms[0]))
        if not self.X.is_discrete:
            # T is smooth, or piecewise constant between the jumps below; the
            # integrand is then smooth on every piece
            cuts = [a]
            if self.Y.is_discrete:
                jumps = self._jumps()
                lo, hi = np.searchsorted(jumps, [a, b], side="right")
                cuts.extend(jumps[lo:hi][jumps[lo:hi] < b].tolist())
            cuts.append(b)
            t, w = _gl(16)
            total = 0.0
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                half, mid = 0.5 * (hi - lo), 0.5 * (lo + hi)
                total += half * float(np.dot(w, self._slope(mid + half * t)))
            return total
        val, _ = integrate.quad(lambda s: float(self._slope(s)), a, b,
                                epsabs=1e-13, epsrel=self.rtol, limit=200)
        return val

    def _gaps(self, pts):
        """Integrals over every gap of the sorted points in one vectorized pass."""
        if pts.size < 2:
            return np.zeros(0)
        cuts = pts
        if self.Y.is_discrete:
            cuts = np.union1d(pts, self._jumps()[(self._jumps() > pts[0]) & (self._jumps() < pts[-1])])
        lo, hi = cuts[:-1], cuts[1:]
        t, w = _gl(16)
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        vals = self._slope(mid[:, None] + half[:, None] * t[None, :]) @ w * half
        # fold the pieces back onto the gaps between consecutive points
        owner = np.searchsorted(pts, lo, side="right") - 1
        return np.bincount(owner, vals, minlength=pts.size - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        if np.any(flat < self._lo) or np.any(flat > self._hi):
            raise OracleError("evaluation point outside the support of X")
        pts = np.unique(np.concatenate([flat, [self.x0]]))
        if self.X.is_discrete or (self.Y.is_atom and self.spec.kind == "power"):
            steps = np.array([self._integral(a, b) for a, b in zip(pts[:-1], pts[1:])])
        else:
            steps = self._gaps(pts)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        cum -= cum[np.searchsorted(pts, self.x0)]
        return cum[np.searchsorted(pts, flat)].reshape(x.shape)


def potential_1d(spec: CostSpec, X: Distribution1D, Y: Distribution1D, x0: float,
                 grid=None):
    """Anchored potential. Returns the evaluator, or its values on ``grid`` if given."""
    phi = Potential1D(spec, X, Y, x0)
    if grid is None:
        return phi
    return phi(np.asarray(grid, dtype=float))


def _expect(X: Distribution1D, g, quad_points):
    """``E g(X)`` via the quantile representation."""
    if X.is_discrete:
        return float(X.weights @ g(X.atoms))
    return _quantile_integral(g, (X,), 0.0, 1.0, quad_points, max_level=10)


def sigma_sq_1d(spec: CostSpec, X: Distribution1D, Y: Distribution1D, quad_points: int = 20,
                x0: Optional[float] = None) -> float:
    """Limiting variance ``Var_X(phi)`` of the one-sample CLT.

    ``x0`` is the anchor of the potential; the variance does not depend on it.
    """
    _check_spec(spec)
    if Y.is_atom and spec.kind == "power":
        # phi = h(. - y0) up to a constant
        g = lambda x: _h(spec, x - Y.atoms[0])
    else:
        if x0 is None:
            x0 = X.quantile(0.5) if not X.is_discrete else X.atoms[0]
        phi = Potential1D(spec, X, Y, float(x0))
        if X.is_discrete:
            g = phi
        else:
            g = _PhiOnNodes(phi)
    m1 = _expect(X, g, quad_points)
    m2 = _expect(X, lambda x: g(x) ** 2, quad_points)
    var = m2 - m1 * m1
    if not np.isfinite(var):
        raise OracleError("divergent variance quadrature")
    return max(var, 0.0)


class _PhiOnNodes:
    """Memoizing wrapper; quadrature revisits the same node sets."""

    def __init__(self, phi):
        self.phi = phi
        self._cache = {}

    def _gaps(self, pts):
        """Integrals over every gap of the sorted points in one vectorized pass."""
        if pts.size < 2:
            return np.zeros(0)
        cuts = pts
        if self.Y.is_discrete:
            cuts = np.union1d(pts, self._jumps()[(self._jumps() > pts[0]) & (self._jumps() < pts[-1])])
        lo, hi = cuts[:-1], cuts[1:]
        t, w = _gl(16)
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        vals = self._slope(mid[:, None] + half[:, None] * t[None, :]) @ w * half
        # fold the pieces back onto the gaps between consecutive points
        owner = np.searchsorted(pts, lo, side="right") - 1
        return np.bincount(owner, vals, minlength=pts.size - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key not in self._cache:
            self._cache[key] = self.phi(x)
        return self._cache[key]
