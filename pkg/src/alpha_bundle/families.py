"""Concrete families: the closed-form normal family, expression-backed families and
chart reparameterisations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .errors import DomainError
from .expectation import Box, ClosedForm, SampleSpace, StatisticalFamily
from .expr import DensityExpression, compile_expr, parse
from .numerics import FD2_REL_STEP, FD_REL_STEP, central_diff, hessian, rel_step

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------- normal family
# theta = (mu, sigma)

def _normal_log_density(x, theta):
    mu, s = theta[0], theta[1]
    return -((x - mu) ** 2) / (2.0 * s * s) - math.log(s) - LOG_SQRT_2PI


def _normal_scores(x, theta):
    mu, s = theta[0], theta[1]
    z = x - mu
    return np.stack([z / s**2, z**2 / s**3 - 1.0 / s])


def _normal_scores2(x, theta):
    mu, s = theta[0], theta[1]
    z = x - mu
    d11 = np.full(z.shape, -1.0 / s**2)
    d12 = -2.0 * z / s**3
    d22 = -3.0 * z**2 / s**4 + 1.0 / s**2
    return np.array([[d11, d12], [d12, d22]])


def normal_metric(theta):
    s = theta[1]
    return np.diag([1.0 / s**2, 2.0 / s**2])


def normal_skewness(theta):
    s = theta[1]
    t = np.zeros((2, 2, 2))
    t[0, 0, 1] = t[0, 1, 0] = t[1, 0, 0] = 2.0 / s**3
    t[1, 1, 1] = 8.0 / s**3
    return t


def normal_christoffel_lower(theta, alpha):
    s = theta[1]
    c = np.zeros((2, 2, 2))
    c[0, 0, 1] = (1.0 - alpha) / s**3
    c[0, 1, 0] = c[1, 0, 0] = -(1.0 + alpha) / s**3
    c[1, 1, 1] = -(2.0 + 4.0 * alpha) / s**3
    return c


def normal_christoffel_mixed(theta, alpha):
    s = theta[1]
    c = np.zeros((2, 2, 2))
    c[1, 0, 0] = (1.0 - alpha) / (2.0 * s)
    c[0, 0, 1] = c[0, 1, 0] = -(1.0 + alpha) / s
    c[1, 1, 1] = -(1.0 + 2.0 * alpha) / s
    return c


def normal_christoffel_mixed_derivative(theta, alpha):
    d = np.zeros((2, 2, 2, 2))
    # every mixed symbol is (const)/sigma, so d_sigma = -symbol/sigma
    d[1] = -normal_christoffel_mixed(theta, alpha) / theta[1]
    return d


def normal_curvature(theta, alpha):
    r = np.zeros((2, 2, 2, 2))
    v = (1.0 - alpha**2) / theta[1] ** 4
    r[0, 1, 0, 1] = r[1, 0, 1, 0] = v
    r[0, 1, 1, 0] = r[1, 0, 0, 1] = -v
    return r


def make_normal() -> StatisticalFamily:
    """Univariate normal family in ``(mu, sigma)`` with analytic derivatives and tensors."""
    return StatisticalFamily(
        name="normal",
        n=2,
        domain=Box((-math.inf, 0.0), (math.inf, math.inf)),
        sample_space=SampleSpace.real_line(),
        log_density=_normal_log_density,
        quad_hint=lambda th: (th[0], th[1]),
        score_fn=_normal_scores,
        score2_fn=_normal_scores2,
        inverse_cdf=lambda u, th: th[0] + th[1] * ndtri(u),
        closed=ClosedForm(
            metric=normal_metric,
            skewness=normal_skewness,
            christoffel_lower=normal_christoffel_lower,
            christoffel_mixed=normal_christoffel_mixed,
            christoffel_mixed_derivative=normal_christoffel_mixed_derivative,
            curvature=normal_curvature,
        ),
        safe_box=Box((-2.0, 0.5), (2.0, 3.0)),
    )


def make_exponential() -> StatisticalFamily:
    """Exponential family with rate ``th1`` on ``(0, inf)`` (analytic scores)."""
    return StatisticalFamily(
        name="exponential",
        n=1,
        domain=Box((0.0,), (math.inf,)),
        sample_space=SampleSpace.interval(0.0, math.inf),
        log_density=lambda x, th: math.log(th[0]) - th[0] * x,
        quad_hint=lambda th: (0.0, 1.0 / th[0]),
        score_fn=lambda x, th: np.stack([1.0 / th[0] - x]),
        score2_fn=lambda x, th: np.full((1, 1) + np.shape(x), -1.0 / th[0] ** 2),
        inverse_cdf=lambda u, th: -np.log1p(-u) / th[0],
        safe_box=Box((0.5,), (3.0,)),
    )


# ---------------------------------------------------------- expression families

NORMAL_SOURCE = "-(x-th1)^2/(2*th2^2) - log(th2) - 0.5*log(2*pi)"


def parse_density(src: str, n: int) -> DensityExpression:
    return DensityExpression.parse(src, n)


def hint_from_expressions(loc: str, scale: str, n: int) -> Callable:
    """Quadrature hint whose location and scale are expressions in ``th1..thn``."""
    floc = compile_expr(parse(loc, n, allow_x=False))
    fscale = compile_expr(parse(scale, n, allow_x=False))
    return lambda th: (float(floc(0.0, th)), float(fscale(0.0, th)))


def make_family_from_expression(expr: DensityExpression, sample_space: SampleSpace, domain: Box,
                                quad_hint: Callable, name: Optional[str] = None,
                                safe_box: Optional[Box] = None) -> StatisticalFamily:
    """Family whose derivatives come from finite differences of the evaluated expression."""
    if domain.n != expr.n:
        raise ValueError("domain dimension does not match the expression")
    f = expr.compile()
    return StatisticalFamily(
        name=name or f"expr[{expr}]",
        n=expr.n,
        domain=domain,
        sample_space=sample_space,
        log_density=lambda x, th: f(x, th),
        quad_hint=quad_hint,
        safe_box=safe_box,
        metadata={"expression": str(expr)},
    )


# ------------------------------------------------------------ reparameterisation

@dataclass(frozen=True)
class Reparameterization:
    """New chart ``theta' = forward(theta)`` with inverse ``inverse``.

    ``jacobian(theta')`` is the transition function ``d theta / d theta'`` (the
    Jacobian of ``inverse``); when omitted it is computed by central differences.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "reparam"

    def transition(self, theta_new) -> np.ndarray:
        theta_new = np.asarray(theta_new, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(theta_new), dtype=float)
        cols = []
        for m in range(theta_new.size):
            h = rel_step(theta_new[m], FD_REL_STEP)
            e = np.zeros_like(theta_new)
            e[m] = h
            cols.append((np.asarray(self.inverse(theta_new + e)) - np.asarray(self.inverse(theta_new - e))) / (2 * h))
        return np.stack(cols, axis=1)

    def transition_derivative(self, theta_new) -> np.ndarray:
        """``d_m J[a, j]`` stored as ``[m, a, j]``.

        Differentiates the analytic Jacobian when there is one, otherwise takes the
        second partials of ``inverse`` directly.
        """
        theta_new = np.asarray(theta_new, dtype=float)
        if self.jacobian is None:
            return hessian(lambda t: np.asarray(self.inverse(t), dtype=float), theta_new).transpose(0, 2, 1)
        out = []
        for m in range(theta_new.size):
            h = rel_step(theta_new[m], FD2_REL_STEP)
            e = np.zeros_like(theta_new)
            e[m] = 1.0
            out.append(central_diff(lambda t: self.transition(theta_new + t * e), h, order=4))
        return np.stack(out)

    def check_roundtrip(self, grid, tol: float = 1e-8) -> float:
        worst = 0.0
        for th in grid:
            th = np.asarray(th, dtype=float)
            worst = max(worst, float(np.max(np.abs(self.inverse(self.forward(th)) - th))))
        if worst > tol:
            raise ValueError(f"inverse(forward(theta)) differs from theta by {worst:g}")
        return worst


def log_scale(index: int = 1) -> Reparameterization:
    """Replace coordinate ``index`` by its logarithm, e.g. ``(mu, sigma) -> (mu, log sigma)``."""

    def fwd(th):
        th = np.array(th, dtype=float)
        th[index] = math.log(th[index])
        return th

    def inv(th):
        th = np.array(th, dtype=float)
        th[index] = math.exp(th[index])
        return th

    def jac(th):
        j = np.eye(len(th))
        j[index, index] = math.exp(th[index])
        return j

    return Reparameterization(fwd, inv, jac, name=f"log[{index}]")


def reparameterize(family: StatisticalFamily, r: Reparameterization,
                   domain: Optional[Box] = None) -> StatisticalFamily:
    """The same densities in the chart ``theta' = r.forward(theta)``.

    Scores follow from the chain rule when the base family has analytic scores,
    otherwise from central differences of ``l(x; inverse(theta'))``.  The
    transition function is exposed as ``family.metadata["transition"]``.  The
    new domain defaults to all of R^n; pass ``domain`` when the image is smaller.
    """
    if domain is None:
        domain = Box((-math.inf,) * family.n, (math.inf,) * family.n)

    def inv(th):
        base = np.asarray(r.inverse(th), dtype=float)
        if not family.domain.contains(base):
            raise DomainError(f"theta'={np.asarray(th).tolist()} maps outside the base domain")
        return base

    def score_fn(x, th):
        J = r.transition(th)
        return np.einsum("am,ai->im", family.score_fn(x, inv(th)), J)

    def score2_fn(x, th):
        base = inv(th)
        J = r.transition(th)
        dJ = r.transition_derivative(th)
        s = family.score_fn(x, base)
        s2 = family.score2_fn(x, base)
        out = np.einsum("abm,ai,bj->ijm", s2, J, J) + np.einsum("am,iaj->ijm", s, dJ)
        return 0.5 * (out + out.transpose(1, 0, 2))

    analytic = family.score_fn is not None and family.score2_fn is not None
    sb = family.default_safe_box()
    corners = [np.asarray(r.forward(np.asarray(sb.lower, float))), np.asarray(r.forward(np.asarray(sb.upper, float)))]
    safe = Box(tuple(np.minimum(*corners)), tuple(np.maximum(*corners)))
    return StatisticalFamily(
        name=f"{family.name}∘{r.name}",
        n=family.n,
        domain=domain,
        sample_space=family.sample_space,
        log_density=lambda x, th: family.log_density(x, inv(th)),
        quad_hint=lambda th: family.quad_hint(inv(th)),
        score_fn=score_fn if analytic else None,
        score2_fn=score2_fn if analytic else None,
        inverse_cdf=(lambda u, th: family.inverse_cdf(u, inv(th))) if family.inverse_cdf else None,
        mc_config=family.mc_config,
        safe_box=safe,
        metadata={"transition": r.transition, "transition_derivative": r.transition_derivative,
                  "base": family, "reparameterization": r},
    )
