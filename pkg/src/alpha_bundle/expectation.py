"""Statistical families, expectation strategies and log-density derivatives.

Integrands are vectorised: they receive an array of sample points and return an
array of the same shape.  Parameter indices are 0-based throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, EvaluationError, UnsupportedStrategyError
from .numerics import FD2_REL_STEP, FD_REL_STEP, hessian, rel_step

LogDensity = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SampleSpace:
    kind: str = "real"
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if self.kind not in ("real", "interval"):
            raise ValueError(f"unknown sample-space kind {self.kind!r}")
        if self.kind == "real" and (math.isfinite(self.lower) or math.isfinite(self.upper)):
            raise ValueError("the whole real line has no finite bounds")
        if not self.lower < self.upper:
            raise ValueError("sample-space bounds must satisfy lower < upper")

    @classmethod
    def real_line(cls) -> "SampleSpace":
        return cls("real")

    @classmethod
    def interval(cls, lower: float, upper: float) -> "SampleSpace":
        return cls("interval", float(lower), float(upper))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lower) & (x < self.upper)


@dataclass(frozen=True)
class Box:
    """Open box ``lower < theta < upper`` (per coordinate, infinities allowed)."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds have different lengths")
        if any(not lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box bounds must satisfy lower < upper")

    @property
    def n(self) -> int:
        return len(self.lower)

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n,) or not np.all(np.isfinite(theta)):
            return False
        return bool(np.all(theta > np.asarray(self.lower)) and np.all(theta < np.asarray(self.upper)))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("can only sample from a bounded box")
        return rng.uniform(lo, hi)


@dataclass(frozen=True)
class MonteCarloConfig:
    count: int = 200_000
    seed: int = 0


@dataclass(frozen=True)
class ClosedForm:
    """Analytic tensor providers; any of them may be missing."""

    metric: Optional[Callable] = None
    skewness: Optional[Callable] = None
    christoffel_lower: Optional[Callable] = None    # (theta, alpha) -> [i, j, k]
    christoffel_mixed: Optional[Callable] = None    # (theta, alpha) -> [k, i, j]
    christoffel_mixed_derivative: Optional[Callable] = None  # -> [m, k, i, j]
    curvature: Optional[Callable] = None            # (theta, alpha) -> [i, j, k, l]


@dataclass(frozen=True)
class StatisticalFamily:
    """A parametric density family ``p(x; theta)`` on a one-dimensional sample space.

    ``score_fn`` and ``score2_fn`` are optional analytic derivatives of the
    log-density, vectorised over ``x``: they return arrays of shape ``(n, m)`` and
    ``(n, n, m)``.  Without them central differences of ``log_density`` are used.
    """

    name: str
    n: int
    domain: Box
    sample_space: SampleSpace
    log_density: LogDensity
    quad_hint: Callable[[np.ndarray], tuple]
    score_fn: Optional[Callable] = None
    score2_fn: Optional[Callable] = None
    inverse_cdf: Optional[Callable] = None
    mc_config: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    closed: Optional[ClosedForm] = None
    safe_box: Optional[Box] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("family dimension must be at least 1")
        if self.domain.n != self.n:
            raise ValueError("domain dimension does not match n")

    def check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if not self.domain.contains(theta):
            raise DomainError(f"theta={theta.tolist()} is outside the domain of {self.name}")
        return theta

    def default_safe_box(self) -> Box:
        if self.safe_box is not None:
            return self.safe_box
        lo, hi = [], []
        for a, b in zip(self.domain.lower, self.domain.upper):
            a, b = max(a, -2.0), min(b, 2.0)
            pad = 0.25 * (b - a)
            lo.append(a + pad)
            hi.append(b - pad)
        return Box(tuple(lo), tuple(hi))


@dataclass(frozen=True)
class Strategy:
    """How expectations are evaluated.

    ``closed`` defers to the family's analytic providers, ``quadrature`` uses a
    Gauss-Hermite rule on the real line (Gauss-Legendre on intervals) and
    ``monte-carlo`` draws seeded samples through the family's inverse CDF.
    """

    kind: str = "quadrature"
    nodes: int = 64
    count: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("closed", "quadrature", "monte-carlo"):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "quadrature" and self.nodes < 2:
            raise ValueError("quadrature needs at least 2 nodes")
        if self.kind == "monte-carlo" and self.count < 1:
            raise ValueError("Monte-Carlo needs at least 1 sample")

    @classmethod
    def closed_form(cls) -> "Strategy":
        return cls("closed")

    @classmethod
    def quadrature(cls, nodes: int = 64) -> "Strategy":
        return cls("quadrature", nodes=nodes)

    @classmethod
    def monte_carlo(cls, count: int = 200_000, seed: int = 0) -> "Strategy":
        return cls("monte-carlo", count=count, seed=seed)

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """Parse ``closed``, ``quad:N`` or ``mc:N[:seed]``."""
        parts = text.strip().split(":")
        if parts[0] == "closed" and len(parts) == 1:
            return cls.closed_form()
        if parts[0] == "quad" and len(parts) <= 2:
            return cls.quadrature(int(parts[1]) if len(parts) == 2 else 64)
        if parts[0] == "mc" and 2 <= len(parts) <= 3:
            return cls.monte_carlo(int(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
        raise ValueError(f"cannot parse strategy {text!r}")

    @property
    def tolerance(self) -> float:
        if self.kind == "monte-carlo":
            return 6.0 / math.sqrt(self.count)
        return 1e-9

    def __str__(self):
        if self.kind == "closed":
            return "closed"
        if self.kind == "quadrature":
            return f"quad:{self.nodes}"
        return f"mc:{self.count}:{self.seed}"


DEFAULT_QUADRATURE = Strategy.quadrature(64)


def resolve(family: StatisticalFamily, strategy: Optional[Strategy]) -> Strategy:
    """``None`` means closed form when the family has providers, else 64-node quadrature."""
    if strategy is None:
        return Strategy.closed_form() if family.closed is not None else DEFAULT_QUADRATURE
    if strategy.kind == "closed" and family.closed is None:
        raise UnsupportedStrategyError(f"{family.name} has no closed-form providers")
    return strategy


@lru_cache(maxsize=32)
def _hermgauss(n: int):
    return np.polynomial.hermite.hermgauss(n)


@lru_cache(maxsize=32)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _log_normal_pdf(x, loc, scale):
    return -0.5 * ((x - loc) / scale) ** 2 - math.log(scale * math.sqrt(2.0 * math.pi))


def sample_rule(family: StatisticalFamily, theta, strategy: Strategy):
    """Nodes ``x`` and weights ``w`` with ``sum(w * f(x)) ~ E[f]`` under ``p(x; theta)``."""
    theta = family.check(theta)
    if strategy.kind == "closed":
        raise UnsupportedStrategyError("closed form applies to tensors, not to arbitrary integrands")
    if strategy.kind == "monte-carlo":
        if family.inverse_cdf is None:
            raise UnsupportedStrategyError(f"{family.name} has no inverse CDF for Monte-Carlo")
        u = np.random.default_rng(strategy.seed).random(strategy.count)
        x = np.asarray(family.inverse_cdf(u, theta), dtype=float)
        return x, np.full(x.shape, 1.0 / x.size)

    loc, scale = family.quad_hint(theta)
    loc, scale = float(loc), float(scale)
    if not scale > 0:
        raise DomainError(f"quadrature scale must be positive, got {scale}")
    space = family.sample_space
    lo, hi = space.lower, space.upper
    if space.kind == "real" or (math.isinf(lo) and math.isinf(hi)):
        t, wt = _hermgauss(strategy.nodes)
        x = loc + scale * math.sqrt(2.0) * t
        logp = np.asarray(family.log_density(x, theta), dtype=float)
        w = wt / math.sqrt(math.pi) * np.exp(logp - _log_normal_pdf(x, loc, scale))
        return x, w
    s, ws = _leggauss(strategy.nodes)
    if math.isfinite(lo) and math.isfinite(hi):
        x = lo + 0.5 * (hi - lo) * (s + 1.0)
        jac = np.full(s.shape, 0.5 * (hi - lo))
    elif math.isfinite(lo):
        x = lo + scale * (1.0 + s) / (1.0 - s)
        jac = 2.0 * scale / (1.0 - s) ** 2
    else:
        x = hi - scale * (1.0 + s) / (1.0 - s)
        jac = 2.0 * scale / (1.0 - s) ** 2
    logp = np.asarray(family.log_density(x, theta), dtype=float)
    return x, ws * jac * np.exp(logp)


def _check_finite(values: np.ndarray, x: np.ndarray, what: str):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        node = float(x[idx[-1]])
        raise EvaluationError(f"{what} is not finite at node x={node!r}", node=node)


def expect(family: StatisticalFamily, theta, integrand: Callable[[np.ndarray], np.ndarray],
           strategy: Optional[Strategy] = None) -> float:
    """``E[integrand(x)]`` under ``p(x; theta)``."""
    strategy = strategy or DEFAULT_QUADRATURE
    x, w = sample_rule(family, theta, strategy)
    vals = np.asarray(integrand(x), dtype=float)
    vals = np.broadcast_to(vals, x.shape)
    _check_finite(vals, x, "integrand")
    return float(np.sum(w * vals))


def _fd_scores(family: StatisticalFamily, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty((family.n,) + x.shape)
    for i in range(family.n):
        h = rel_step(theta[i], FD_REL_STEP)
        e = np.zeros(family.n)
        e[i] = h
        out[i] = (family.log_density(x, theta + e) - family.log_density(x, theta - e)) / (2.0 * h)
    return out


def _fd_scores2(family: StatisticalFamily, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    # fourth-order stencils at a wider step: nested 2nd-order differences at the
    # score step leave ~1e-6 of round-off in the second derivatives
    return hessian(lambda th: family.log_density(x, th), theta, FD2_REL_STEP)


def _prepare(family: StatisticalFamily, theta, x):
    theta = family.check(theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(family.sample_space.contains(x)):
        raise DomainError(f"sample point(s) outside the support of {family.name}")
    return theta, x


def scores(family: StatisticalFamily, theta, x, analytic: bool = True) -> np.ndarray:
    """All first derivatives ``d_i l(x; theta)``, shape ``(n, len(x))``."""
    theta, x = _prepare(family, theta, x)
    if analytic and family.score_fn is not None:
        return np.asarray(family.score_fn(x, theta), dtype=float)
    return _fd_scores(family, theta, x)


def scores2(family: StatisticalFamily, theta, x, analytic: bool = True) -> np.ndarray:
    """All second derivatives ``d_i d_j l(x; theta)``, shape ``(n, n, len(x))``."""
    theta, x = _prepare(family, theta, x)
    if analytic and family.score2_fn is not None:
        return np.asarray(family.score2_fn(x, theta), dtype=float)
    return _fd_scores2(family, theta, x)


def _index(family, i):
    if not 0 <= i < family.n:
        raise IndexError(f"parameter index {i} out of range for n={family.n}")
    return i


def score(family: StatisticalFamily, theta, x: float, i: int, analytic: bool = True) -> float:
    i = _index(family, i)
    return float(scores(family, theta, x, analytic)[i, 0])


def score2(family: StatisticalFamily, theta, x: float, i: int, j: int, analytic: bool = True) -> float:
    i, j = _index(family, i), _index(family, j)
    return float(scores2(family, theta, x, analytic)[i, j, 0])


def score_moments(family: StatisticalFamily, theta, strategy: Strategy):
    """Return ``(g, T, E[(d_i d_j l)(d_k l)])`` from one set of nodes."""
    x, w = sample_rule(family, theta, strategy)
    s = scores(family, theta, x)
    s2 = scores2(family, theta, x)
    _check_finite(s, x, "score")
    _check_finite(s2, x, "second score")
    g = np.einsum("im,jm,m->ij", s, s, w)
    t = np.einsum("im,jm,km,m->ijk", s, s, s, w)
    e2 = np.einsum("ijm,km,m->ijk", s2, s, w)
    return g, t, e2


def as_array(theta: Sequence[float]) -> np.ndarray:
    return np.asarray(theta, dtype=float).reshape(-1)
