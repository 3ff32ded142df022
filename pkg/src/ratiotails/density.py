"""Densities of the demand/supply ratio and of its response transforms.

The ratio R = D/S of two jointly normal order flows has a density that is
available in closed form when the correlation is exactly -1 (the supply is
then a decreasing affine function of the demand) and by one-dimensional
quadrature of the defining integral

    f_R(x) = int |s| phi2(x*s, s) ds

for -1 < rho < 1.  Densities of g(R) for an increasing response g follow by
the change-of-variables rule, conditioned on the positive-ratio event.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, InitVar

import numpy as np
from scipy.integrate import quad

from .errors import (BranchError, DomainError, QuadratureError, RangeError)
from .response import ResponseSpec, TailClass, TailKind, invert_monotone

__all__ = [
    "OrderFlowParams",
    "ratio_density_anticorr",
    "ratio_cdf_anticorr",
    "ratio_density",
    "positive_ratio_mass",
    "PowerMap",
    "transform_density",
    "TransformedDensity",
    "TailPrediction",
    "tail_prediction",
    "CurveMethod",
    "DensityCurve",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OrderFlowParams:
    """Means, spreads and correlation of the (demand, supply) normal pair.

    Both means must be strictly positive.  rho = -1 selects the degenerate
    anticorrelated pair with its exact ratio density; rho = 1 is rejected.
    """

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        for name in ("mu1", "mu2", "sigma1", "sigma2", "rho"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not validate:
            return
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise DomainError("order-flow means must be strictly positive")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise DomainError("order-flow spreads must be strictly positive")
        if not (-1.0 <= self.rho < 1.0):
            raise DomainError(f"correlation must lie in [-1, 1), got {self.rho}")

    @classmethod
    def _unchecked(cls, mu1, mu2, sigma1, sigma2, rho):
        """Bypass validation (diagnostic use, e.g. zero-mean Cauchy checks)."""
        return cls(mu1, mu2, sigma1, sigma2, rho, validate=False)

    @property
    def is_anticorrelated(self) -> bool:
        return self.rho == -1.0

    def as_dict(self) -> dict:
        return {"mu1": self.mu1, "mu2": self.mu2, "sigma1": self.sigma1,
                "sigma2": self.sigma2, "rho": self.rho}


# ---------------------------------------------------------------------------
# exact anticorrelated branch
# ---------------------------------------------------------------------------

def ratio_density_anticorr(params: OrderFlowParams, x):
    """Exact ratio density for the degenerate anticorrelated pair.

    f(x) = (mu1*sigma2 + mu2*sigma1)/sqrt(2 pi)
           * exp(-((mu2*x - mu1)/(sigma2*x + sigma1))**2 / 2)
           / (sigma2*x + sigma1)**2

    with the removable singularity at x = -sigma1/sigma2 set to 0.
    """
    if not params.is_anticorrelated:
        raise BranchError("exact branch requires rho = -1; "
                          "use ratio_density for -1 < rho < 1")
    x = np.asarray(x, dtype=float)
    den = params.sigma2 * x + params.sigma1
    amp = (params.mu1 * params.sigma2 + params.mu2 * params.sigma1) / _SQRT_2PI
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = (params.mu2 * x - params.mu1) / den
        val = amp * np.exp(-0.5 * u * u) / (den * den)
    out = np.where(den == 0.0, 0.0, val)
    return out if out.ndim else float(out)


def ratio_cdf_anticorr(params: OrderFlowParams, x):
    """Exact ratio CDF for the anticorrelated pair.

    Piecewise in x around the pole -sigma1/sigma2: substituting
    u = (mu2*x - mu1)/(sigma2*x + sigma1) turns the density into the
    standard normal one, branch by branch.
    """
    from scipy.stats import norm

    if not params.is_anticorrelated:
        raise BranchError("exact branch requires rho = -1")
    x = np.asarray(x, dtype=float)
    pole = -params.sigma1 / params.sigma2
    u_inf = params.mu2 / params.sigma2  # u at x -> +-inf
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (params.mu2 * x - params.mu1) / (params.sigma2 * x + params.sigma1)
    below = norm.cdf(u) - norm.cdf(u_inf)          # branch x < pole
    above = norm.cdf(u) + 1.0 - norm.cdf(u_inf)    # branch x > pole
    out = np.where(x < pole, below, above)
    out = np.where(x == pole, 1.0 - norm.cdf(u_inf), out)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# general-correlation branch: quadrature of the defining integral
# ---------------------------------------------------------------------------

def _ratio_integrand_factory(params: OrderFlowParams, x: float):
    """Integrand |s| phi2(x*s, s) plus the Gaussian profile of s."""
    s1, s2, rho = params.sigma1, params.sigma2, params.rho
    mu1, mu2 = params.mu1, params.mu2
    omr2 = 1.0 - rho * rho
    norm_c = 1.0 / (2.0 * math.pi * s1 * s2 * math.sqrt(omr2))

    def integrand(s):
        d = x * s - mu1
        e = s - mu2
        qf = (d * d / (s1 * s1) - 2.0 * rho * d * e / (s1 * s2)
              + e * e / (s2 * s2)) / omr2
        return abs(s) * norm_c * math.exp(-0.5 * qf)

    # exponent is quadratic in s: 0.5*(A s^2 - 2 B s + const)
    a_coef = (x * x / (s1 * s1) - 2.0 * rho * x / (s1 * s2) + 1.0 / (s2 * s2)) / omr2
    b_coef = (x * mu1 / (s1 * s1) - rho * (mu1 + mu2 * x) / (s1 * s2)
              + mu2 / (s2 * s2)) / omr2
    center = b_coef / a_coef
    width = 1.0 / math.sqrt(a_coef)
    return integrand, center, width


def ratio_density(params: OrderFlowParams, x, *, abs_tol: float = 1e-10):
    """Ratio density for -1 < rho < 1 by adaptive quadrature.

    Integrates the defining integral over a window of +-60 profile widths
    around the Gaussian center of the integrand, splitting at s = 0 where
    the |s| factor kinks.  The truncated tails are below 1e-300 of the
    peak.  Raises QuadratureError when the library reports nonconvergence
    or the error bound misses both the absolute and a 1e-6 relative target.
    """
    if params.is_anticorrelated:
        raise BranchError("rho = -1 has an exact density; "
                          "use ratio_density_anticorr")
    if not (-1.0 < params.rho < 1.0):
        raise DomainError(f"correlation {params.rho} outside (-1, 1)")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        integrand, m, w = _ratio_integrand_factory(params, float(xi))
        lo = min(0.0, m - 60.0 * w)
        hi = max(0.0, m + 60.0 * w)
        pts = sorted({p for p in (0.0, m - 8.0 * w, m, m + 8.0 * w) if lo < p < hi})
        val, err, info, *msg = quad(integrand, lo, hi, points=pts or None,
                                    epsabs=abs_tol, epsrel=1e-10,
                                    limit=200, full_output=1)
        if msg or (err > abs_tol and err > 1e-6 * abs(val)):
            raise QuadratureError(
                f"ratio density quadrature failed at x={xi:g}: "
                f"estimate {val:g}, error bound {err:g}"
                + (f", message: {msg[0]}" if msg else ""),
                value=val, error_bound=err)
        out[i] = val
    return out if np.ndim(x) else float(out[0])


def _density_fn(params: OrderFlowParams):
    if params.is_anticorrelated:
        return lambda t: ratio_density_anticorr(params, t)
    return lambda t: ratio_density(params, t)


def positive_ratio_mass(params: OrderFlowParams) -> float:
    """P(R > 0) = P(demand and supply share a sign).

    Closed form for rho = -1; for the general case the density is
    integrated over (0, inf) with a 1/t fold for the far tail.
    """
    from scipy.stats import norm

    if params.is_anticorrelated:
        return float(norm.cdf(params.mu2 / params.sigma2)
                     - norm.cdf(-params.mu1 / params.sigma1))
    fn = _density_fn(params)
    split = params.mu1 / params.mu2 + 20.0 * (params.sigma1 / params.mu2
                                              + params.sigma2 * params.mu1 / params.mu2 ** 2)
    core, _ = quad(fn, 0.0, split, limit=400)
    # map (split, inf) to (0, 1/split] via t = 1/x
    tail, _ = quad(lambda t: fn(1.0 / t) / (t * t), 1e-12, 1.0 / split, limit=400)
    return float(core + tail)


# ---------------------------------------------------------------------------
# change of variables through a response function
# ---------------------------------------------------------------------------

class PowerMap:
    """The pure power map r -> r**q on r > 0 (a transform, not a response)."""

    def __init__(self, q: float):
        if not (q > 0):
            raise DomainError(f"power map exponent must be positive, got {q}")
        self.q = float(q)

    def label(self) -> str:
        return f"pow(q={self.q:g})"


def transform_density(base, transform, x, *, positive_mass: float | None = None,
                      inverse_rtol: float = 1e-12):
    """Density of transform(R) given the density of R, conditioned on R > 0.

    ``base`` is a callable density of R.  For an increasing response g the
    value is f_R(g^-1(x)) / g'(g^-1(x)), divided by P(R > 0) computed from
    ``base`` (pass ``positive_mass`` to reuse it across calls).  The
    inverse is found by bracketed root finding; the pure power map uses
    its closed form f_R(x**(1/q)) * x**(1/q - 1) / q directly and is
    supported on x > 0 only.
    """
    if positive_mass is None:
        split = 10.0
        core, _ = quad(base, 0.0, split, limit=400)
        tail, _ = quad(lambda t: base(1.0 / t) / (t * t), 1e-12, 1.0 / split,
                       limit=400)
        positive_mass = core + tail
    if not (positive_mass > 0.0):
        raise DomainError("base density has no mass on R > 0")

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)

    if isinstance(transform, PowerMap):
        q = transform.q
        for i, xi in enumerate(xs):
            if xi <= 0.0:
                raise RangeError(f"power-map density is supported on x > 0, got {xi}")
            r = xi ** (1.0 / q)
            out[i] = base(r) * r / (q * xi) / positive_mass
        return out if np.ndim(x) else float(out[0])

    for i, xi in enumerate(xs):
        r = invert_monotone(transform.value, float(xi), rtol=inverse_rtol)
        slope = transform.deriv(r, 1)
        if slope <= 0.0:
            raise DomainError(f"transform is not increasing at r={r:g}")
        out[i] = base(r) / slope / positive_mass
    return out if np.ndim(x) else float(out[0])


class TransformedDensity:
    """Reusable density of response(R), with P(R > 0) computed once."""

    def __init__(self, params: OrderFlowParams, response):
        self.params = params
        self.response = response
        self.base = _density_fn(params)
        self.positive_mass = positive_ratio_mass(params)

    def __call__(self, x):
        return transform_density(self.base, self.response, x,
                                 positive_mass=self.positive_mass)


# ---------------------------------------------------------------------------
# tail prediction with a numerically estimated prefactor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailPrediction:
    tail: TailClass
    prefactor: float
    prefactor_drift: float  # relative change across the last two probe points
    probes: tuple

    def key_values(self) -> dict:
        d = {"class": self.tail.kind.value, "tail": self.tail.describe(),
             "prefactor": self.prefactor,
             "prefactor_drift": self.prefactor_drift}
        if self.tail.density_exponent is not None:
            d["density_exponent"] = self.tail.density_exponent
        if self.tail.rate is not None:
            d["rate"] = self.tail.rate
        if self.tail.shape is not None:
            d["shape"] = self.tail.shape
        return d


def tail_prediction(params: OrderFlowParams, spec: ResponseSpec) -> TailPrediction:
    """Predicted tail class plus a numerical estimate of its prefactor.

    The prefactor is read off as the compensated density value
    c(x) * f(x) at geometrically spaced probes, where c undoes the
    predicted decay (x**e for a power law, exp(rate*x) for exponential,
    x**(1-p) * exp(x**p) for the stretched form).  The drift between the
    last two probes is reported as the accuracy proxy; no closed form for
    the prefactor is attempted.
    """
    tail = spec.predicted_tail()
    density = TransformedDensity(params, spec)

    if tail.kind is TailKind.POWER_LAW:
        probes = np.array([1e2, 3e2, 1e3, 3e3, 1e4])
        comp = probes ** tail.density_exponent
    elif tail.kind is TailKind.EXPONENTIAL:
        probes = np.array([6.0, 8.0, 10.0, 12.0, 14.0])
        comp = np.exp(tail.rate * probes)
    else:
        p = tail.shape
        probes = np.array([6.0, 8.0, 10.0, 12.0, 14.0]) ** (1.0 / p)
        comp = probes ** (1.0 - p) * np.exp(probes ** p)

    values = comp * np.array([density(float(t)) for t in probes])
    drift = abs(values[-1] - values[-2]) / max(abs(values[-1]), 1e-300)
    return TailPrediction(tail=tail, prefactor=float(values[-1]),
                          prefactor_drift=float(drift),
                          probes=tuple(zip(probes.tolist(), values.tolist())))


# ---------------------------------------------------------------------------
# evaluated curves
# ---------------------------------------------------------------------------

class CurveMethod(str, enum.Enum):
    EXACT_ANTICORR = "exact_anticorr"
    QUADRATURE = "quadrature"
    EMPIRICAL = "empirical"


@dataclass
class DensityCurve:
    """A density evaluated on a strictly increasing grid.

    ``mass`` is the trapezoid integral over the grid; curves meant to
    cover the support should carry mass in [0.98, 1.001] (see
    ``check_mass``).
    """

    grid: np.ndarray
    values: np.ndarray
    method: CurveMethod
    mass: float = field(init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise DomainError("grid and values must be aligned 1-d arrays")
        if np.any(np.diff(self.grid) <= 0):
            raise DomainError("curve grid must be strictly increasing")
        if np.any(self.values < 0):
            raise DomainError("density values must be nonnegative")
        self.method = CurveMethod(self.method)
        self.mass = float(np.trapezoid(self.values, self.grid))

    @classmethod
    def from_function(cls, fn, grid, method: CurveMethod) -> "DensityCurve":
        grid = np.asarray(grid, dtype=float)
        vals = np.array([float(fn(x)) for x in grid])
        return cls(grid, vals, method)

    @classmethod
    def from_samples(cls, samples, bins: int = 200,
                     range_: tuple | None = None) -> "DensityCurve":
        hist, edges = np.histogram(samples, bins=bins, range=range_, density=True)
        centers = 0.5 * (edges[:-1] + edges[1:])
        return cls(centers, hist, CurveMethod.EMPIRICAL)

    def check_mass(self, lo: float = 0.98, hi: float = 1.001) -> bool:
        return lo <= self.mass <= hi

    def loglog_tail_slope(self, x_min: float, x_max: float) -> float:
        """Least-squares slope of log(values) vs log(grid) on [x_min, x_max]."""
        m = (self.grid >= x_min) & (self.grid <= x_max) & (self.values > 0)
        if m.sum() < 2:
            raise DomainError("fewer than two usable points in the slope window")
        lx, ly = np.log(self.grid[m]), np.log(self.values[m])
        return float(np.polyfit(lx, ly, 1)[0])

    def semilog_tail_slope(self, x_min: float, x_max: float) -> float:
        """Least-squares slope of log(values) vs grid on [x_min, x_max]."""
        m = (self.grid >= x_min) & (self.grid <= x_max) & (self.values > 0)
        if m.sum() < 2:
            raise DomainError("fewer than two usable points in the slope window")
        return float(np.polyfit(self.grid[m], np.log(self.values[m]), 1)[0])
