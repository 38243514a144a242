"""Discrete probability measures, sample sources and CSV ingestion."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .rng import stream


class MeasureError(ValueError):
    """Invalid measure data or configuration."""


WEIGHT_SUM_TOL = 1e-9
CSV_RENORM_TOL = 1e-6


class DiscreteMeasure:
    """Weighted point cloud in R^d. Points are stored as an ``(n, d)`` array.

    Duplicate points are kept as separate atoms.
    """

    __slots__ = ("points", "weights")

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise MeasureError(f"points must be a non-empty (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise MeasureError("points contain non-finite coordinates")
        n = pts.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise MeasureError(f"{w.shape[0]} weights for {n} points")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise MeasureError("weights must be finite and strictly positive")
            if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
                raise MeasureError(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return f"DiscreteMeasure(n={self.n}, d={self.d})"

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


# sample sources

@dataclass(frozen=True)
class SampleSource:
    """Product law on R^d used to draw i.i.d. samples.

    ``kind`` is ``"uniform"`` (params = per-axis ``(a, b)``), ``"gaussian"``
    (params = per-axis ``(mean, sd)``), ``"shift"`` (``base`` shifted by
    ``offset``) or ``"file"`` (resampling the rows of a CSV file).
    """

    kind: str
    params: Tuple[Tuple[float, float], ...] = ()
    base: Optional["SampleSource"] = None
    offset: Tuple[float, ...] = ()
    path: Optional[str] = None
    label: str = "sample"

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.params or any(not a < b for a, b in self.params):
                raise MeasureError("uniform source needs a < b on every axis")
        elif self.kind == "gaussian":
            if not self.params or any(not sd > 0 for _, sd in self.params):
                raise MeasureError("gaussian source needs sd > 0 on every axis")
        elif self.kind == "shift":
            if self.base is None or len(self.offset) != self.base.d:
                raise MeasureError("shift source needs a base and an offset of matching dimension")
        elif self.kind == "file":
            if not self.path:
                raise MeasureError("file source needs a path")
        else:
            raise MeasureError(f"unsupported generator {self.kind!r}")

    @classmethod
    def uniform(cls, *bounds: Sequence[float], label: str = "sample") -> "SampleSource":
        return cls("uniform", tuple((float(a), float(b)) for a, b in bounds), label=label)

    @classmethod
    def gaussian(cls, *params: Sequence[float], label: str = "sample") -> "SampleSource":
        return cls("gaussian", tuple((float(mu), float(sd)) for mu, sd in params), label=label)

    @classmethod
    def shifted(cls, base: "SampleSource", offset: Sequence[float], label: str = "sample") -> "SampleSource":
        return cls("shift", base=base, offset=tuple(float(o) for o in offset), label=label)

    @classmethod
    def from_file(cls, path: str, label: str = "sample") -> "SampleSource":
        return cls("file", path=str(path), label=label)

    @classmethod
    def parse(cls, text: str, label: str = "sample") -> "SampleSource":
        """Parse ``unif:a:b[:a2:b2...]``, ``gauss:mu:sd[...]`` or ``file:<path>``."""
        head, _, rest = text.partition(":")
        if head == "file":
            if not rest:
                raise MeasureError(f"malformed generator {text!r}: missing path")
            return cls.from_file(rest, label=label)
        if head not in ("unif", "gauss"):
            raise MeasureError(f"unsupported generator {text!r}; use unif:, gauss: or file:")
        try:
            vals = [float(t) for t in rest.split(":")] if rest else []
        except ValueError:
            raise MeasureError(f"malformed generator {text!r}: non-numeric parameter") from None
        if not vals or len(vals) % 2:
            raise MeasureError(f"malformed generator {text!r}: parameters come in pairs")
        pairs = tuple(zip(vals[::2], vals[1::2]))
        return cls("uniform" if head == "unif" else "gaussian", pairs, label=label)

    @property
    def d(self) -> int:
        if self.kind in ("uniform", "gaussian"):
            return len(self.params)
        if self.kind == "shift":
            return self.base.d
        return _file_rows(self.path).shape[1]

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            lo = np.array([a for a, _ in self.params])
            hi = np.array([b for _, b in self.params])
            return lo + (hi - lo) * rng.random((n, len(lo)))
        if self.kind == "gaussian":
            mu = np.array([a for a, _ in self.params])
            sd = np.array([b for _, b in self.params])
            return mu + sd * rng.standard_normal((n, len(mu)))
        if self.kind == "shift":
            return self.base.draw(rng, n) + np.asarray(self.offset)
        rows = _file_rows(self.path)
        return rows[rng.integers(0, rows.shape[0], size=n)]


def _file_rows(path) -> np.ndarray:
    with open(path, newline="") as fh:
        first = next(csv.reader(fh), None)
    if first is None:
        raise MeasureError(f"{path}: empty file")
    return load_csv(path, len(first)).points


def empirical_from_sample(src: SampleSource, n: int, seed: int) -> DiscreteMeasure:
    """Empirical measure of ``n`` i.i.d. draws from ``src`` (weights ``1/n``).

    The stream is keyed by ``(seed, src.label)`` so equal arguments reproduce
    the same measure bit for bit.
    """
    if int(n) != n or n < 1:
        raise MeasureError(f"sample size must be >= 1, got {n!r}")
    rng = stream(seed, src.label)
    return DiscreteMeasure(src.draw(rng, int(n)))


def grid_measure(a: float, b: float, n: int) -> DiscreteMeasure:
    """Midpoint discretization of Unif(a, b) with ``n`` equal atoms."""
    return DiscreteMeasure(a + (b - a) * (np.arange(n) + 0.5) / n)


# CSV

def load_csv(path, d: int) -> DiscreteMeasure:
    """Read ``d`` coordinates per row, optionally followed by a weight."""
    pts, wts = [], []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise MeasureError(f"{path}: {exc.strerror}") from None
    with fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) not in (d, d + 1):
                raise MeasureError(f"{path}: row {r} has {len(row)} fields, expected {d} or {d + 1}")
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    x = float(cell)
                except ValueError:
                    raise MeasureError(f"{path}: parse error at row {r}, column {c}: {cell!r}") from None
                if not np.isfinite(x):
                    raise MeasureError(f"{path}: non-finite value at row {r}, column {c}")
                vals.append(x)
            pts.append(vals[:d])
            wts.append(vals[d] if len(vals) > d else None)
    if not pts:
        raise MeasureError(f"{path}: no data rows")
    has_w = [w is not None for w in wts]
    if any(has_w) and not all(has_w):
        raise MeasureError(f"{path}: weight column present on some rows only")
    if not any(has_w):
        return DiscreteMeasure(np.array(pts))
    w = np.array(wts)
    if np.any(w <= 0):
        r = int(np.argmax(w <= 0)) + 1
        raise MeasureError(f"{path}: non-positive weight at row {r}")
    total = w.sum()
    if abs(total - 1.0) > CSV_RENORM_TOL:
        raise MeasureError(f"{path}: weights sum to {total!r}, deviation exceeds {CSV_RENORM_TOL}")
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        w = w / total
    return DiscreteMeasure(np.array(pts), w)


def write_csv(measure: DiscreteMeasure, path, with_weights: bool = True) -> None:
    """Write one row per atom with 17 significant digits, atomically."""
    lines = []
    for x, w in zip(measure.points, measure.weights):
        cells = [fmt(v) for v in x]
        if with_weights:
            cells.append(fmt(w))
        lines.append(",".join(cells))
    atomic_write(path, "\n".join(lines) + "\n")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
