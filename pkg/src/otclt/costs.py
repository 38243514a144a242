"""Translation-invariant costs ``c(x, y) = h(x - y)`` with strictly convex ``h``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .rng import stream


class CostError(ValueError):
    """Raised for malformed cost configuration or inputs."""


Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CostSpec:
    """Cost ``h`` together with its gradient and inverse gradient.

    Use :meth:`power` for ``h(v) = |v|^p``. Custom costs pass vectorized
    callables acting on arrays of shape ``(..., d)``: ``h`` returns shape
    ``(...)``, ``grad`` and ``grad_inv`` return shape ``(..., d)``.
    """

    kind: str
    d: int
    p: Optional[float] = None
    h: Optional[Func] = field(default=None, compare=False, repr=False)
    grad: Optional[Func] = field(default=None, compare=False, repr=False)
    grad_inv: Optional[Func] = field(default=None, compare=False, repr=False)
    name: str = ""

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise CostError(f"dimension must be a positive integer, got {self.d!r}")
        if self.kind == "power":
            if self.p is None or not np.isfinite(self.p) or self.p <= 1:
                raise CostError(f"power cost needs p > 1, got {self.p!r}")
        elif self.kind == "custom":
            if self.h is None:
                raise CostError("custom cost needs an evaluator for h")
        else:
            raise CostError(f"unknown cost kind {self.kind!r}")

    @classmethod
    def power(cls, p: float, d: int = 1) -> "CostSpec":
        return cls(kind="power", d=d, p=float(p), name=f"power:{float(p):g}")

    @classmethod
    def custom(cls, h: Func, grad: Func | None = None, grad_inv: Func | None = None,
               d: int = 1, name: str = "custom") -> "CostSpec":
        return cls(kind="custom", d=d, h=h, grad=grad, grad_inv=grad_inv, name=name)

    @classmethod
    def parse(cls, text: str, d: int = 1) -> "CostSpec":
        """Parse a configuration string such as ``"power:2"``."""
        kind, _, arg = text.partition(":")
        if kind != "power" or not arg:
            raise CostError(f"malformed cost string {text!r}; expected 'power:<p>'")
        try:
            p = float(arg)
        except ValueError:
            raise CostError(f"malformed cost string {text!r}; p is not a number") from None
        return cls.power(p, d)

    @property
    def symmetric(self) -> bool:
        return self.kind == "power"

    def with_dim(self, d: int) -> "CostSpec":
        if d == self.d:
            return self
        return CostSpec(self.kind, d, self.p, self.h, self.grad, self.grad_inv, self.name)

    # vectorized primitives on difference vectors of shape (..., d)

    def h_of(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "power":
            return _norm(v) ** self.p
        return np.asarray(self.h(v), dtype=float)

    def grad_of(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "power":
            r = _norm(v)[..., None]
            with np.errstate(divide="ignore", invalid="ignore"):
                g = self.p * r ** (self.p - 2) * v
            return np.where(r > 0, g, 0.0)
        if self.grad is None:
            raise CostError(f"cost {self.name!r} has no gradient evaluator")
        return np.asarray(self.grad(v), dtype=float)

    def grad_inv_of(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "power":
            r = _norm(z)[..., None]
            with np.errstate(divide="ignore", invalid="ignore"):
                v = (r / self.p) ** (1.0 / (self.p - 1)) * z / r
            return np.where(r > 0, v, 0.0)
        if self.grad_inv is None:
            raise CostError(f"cost {self.name!r} has no inverse-gradient evaluator")
        return np.asarray(self.grad_inv(z), dtype=float)


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def _as_point(spec: CostSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise CostError(f"expected a point of dimension {spec.d}, got shape {x.shape}")
    return x


def evaluate_cost(spec: CostSpec, x, y) -> float:
    """Return ``h(x - y)``."""
    return float(spec.h_of(_as_point(spec, x) - _as_point(spec, y)))


def gradient(spec: CostSpec, v) -> np.ndarray:
    return spec.grad_of(_as_point(spec, v))


def grad_conjugate(spec: CostSpec, z) -> np.ndarray:
    """Inverse of the gradient map: the unique ``v`` with ``grad h(v) = z``."""
    return spec.grad_inv_of(_as_point(spec, z))


@dataclass
class AssumptionReport:
    strict_convexity: bool
    worst_midpoint_gap: float
    superlinear_growth: bool
    cone_condition: str
    passed: bool
    probes: int

    def as_dict(self) -> dict:
        return {
            "strict_convexity": self.strict_convexity,
            "worst_midpoint_gap": self.worst_midpoint_gap,
            "superlinear_growth": self.superlinear_growth,
            "cone_condition": self.cone_condition,
            "passed": self.passed,
            "probes": self.probes,
        }


CONE_NOTE = "not numerically checkable; guaranteed for power costs (p > 1)"


def validate_assumptions(spec: CostSpec, probes: int = 200, rng_seed: int = 0,
                         tol: float = 1e-12) -> AssumptionReport:
    """Probe strict convexity and superlinear growth of ``h``.

    Strict convexity is tested with midpoints of random distinct pairs, both
    generic and collinear with the origin (where norms are affine). Growth is
    tested by checking that ``h(R w) / R`` increases along ``R = 10, ..., 1e4``.
    """
    if probes < 1:
        raise CostError("probes must be >= 1")
    rng = stream(rng_seed, "validate_assumptions")
    d = spec.d
    u = rng.normal(size=(probes, d)) * rng.uniform(0.1, 5.0, size=(probes, 1))
    v = rng.normal(size=(probes, d)) * rng.uniform(0.1, 5.0, size=(probes, 1))
    # collinear probes: v = t * u with t > 0, t != 1
    t = rng.uniform(1.5, 4.0, size=(probes, 1))
    u = np.vstack([u, u])
    v = np.vstack([v, t * u[:probes]])
    hu, hv = spec.h_of(u), spec.h_of(v)
    hm = spec.h_of(0.5 * (u + v))
    scale = 1.0 + 0.5 * (np.abs(hu) + np.abs(hv))
    gap = (0.5 * (hu + hv) - hm) / scale
    worst = float(np.min(gap))
    strict = bool(worst > tol)

    w = rng.normal(size=(max(probes, 1), d))
    w /= _norm(w)[:, None]
    radii = np.array([10.0, 1e2, 1e3, 1e4])
    ratios = np.stack([spec.h_of(r * w) / r for r in radii], axis=1)
    growth = bool(np.all(np.isfinite(ratios)) and np.all(np.diff(ratios, axis=1) > 0))
    nonneg = bool(np.all(hu >= 0) and np.all(hv >= 0))

    return AssumptionReport(
        strict_convexity=strict,
        worst_midpoint_gap=worst,
        superlinear_growth=growth,
        cone_condition=CONE_NOTE,
        passed=strict and growth and nonneg,
        probes=probes,
    )
