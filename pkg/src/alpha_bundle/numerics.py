"""Small numerical helpers: step policies, central differences, sampled derivatives."""

from __future__ import annotations

from typing import Callable

import numpy as np

FD_REL_STEP = 1e-5          # score / Jacobian differentiation
FD2_REL_STEP = 1e-3         # second log-density derivatives (4th-order stencil)
CHRISTOFFEL_REL_STEP = 1e-4  # differentiating quadrature-backed Christoffel symbols
DIRECTIONAL_STEP = 1e-5     # directional derivatives along bundle curves
BRACKET_STEP = 1e-4         # Lie brackets (nested differentiation)
FORM_STEP = 1e-2            # exterior derivatives of 2-forms (4th-order stencil)


def rel_step(value: float, rel: float = FD_REL_STEP) -> float:
    return rel * max(1.0, abs(float(value)))


def central_diff(f: Callable[[float], np.ndarray], h: float, order: int = 2) -> np.ndarray:
    """Derivative of ``f`` at 0 by a central stencil of the given order (2 or 4)."""
    if order == 2:
        return (np.asarray(f(h)) - np.asarray(f(-h))) / (2.0 * h)
    if order == 4:
        # grouped as differences so that a constant f gives exactly zero
        near = np.asarray(f(h)) - np.asarray(f(-h))
        far = np.asarray(f(2 * h)) - np.asarray(f(-2 * h))
        return (8.0 * near - far) / (12.0 * h)
    raise ValueError(f"unsupported stencil order {order}")


def partials(f: Callable[[np.ndarray], np.ndarray], theta: np.ndarray,
             rel: float = FD_REL_STEP) -> np.ndarray:
    """Stack of central-difference partials, shape (n, *f(theta).shape)."""
    theta = np.asarray(theta, dtype=float)
    out = []
    for m in range(theta.size):
        h = rel_step(theta[m], rel)
        e = np.zeros_like(theta)
        e[m] = 1.0
        out.append(central_diff(lambda t: f(theta + t * e), h))
    return np.stack(out)


_C4 = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


def hessian(f: Callable[[np.ndarray], np.ndarray], theta: np.ndarray,
            rel: float = FD2_REL_STEP) -> np.ndarray:
    """Second partials ``d_i d_j f`` by fourth-order central stencils, shape (n, n, *f.shape).

    Diagonal terms use the 5-point second-derivative stencil, mixed terms the
    tensor product of two 4-point first-derivative stencils.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    steps = [rel_step(theta[i], rel) for i in range(n)]
    centre = np.asarray(f(theta), dtype=float)
    out = np.empty((n, n) + centre.shape)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        out[i, i] = (-np.asarray(f(theta + 2 * ei)) + 16.0 * np.asarray(f(theta + ei)) - 30.0 * centre
                     + 16.0 * np.asarray(f(theta - ei)) - np.asarray(f(theta - 2 * ei))) / (12.0 * steps[i] ** 2)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            acc = 0.0
            for a, ca in _C4:
                for b, cb in _C4:
                    acc = acc + ca * cb * np.asarray(f(theta + a * ei + b * ej))
            out[i, j] = out[j, i] = acc / (steps[i] * steps[j])
    return out


def sample_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite-difference derivative of equally spaced samples along axis 0.

    Needs at least five samples; one-sided fourth-order stencils are used at the ends.
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    if m < 5:
        raise ValueError("need at least 5 samples for a 4th-order derivative")
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * dt)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12.0 * dt)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12.0 * dt)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12.0 * dt)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12.0 * dt)
    return d


def hermite_midpoint(p0, v0, p1, v1, dt):
    """Cubic Hermite interpolant and its derivative at the midpoint of a step."""
    p = 0.5 * (p0 + p1) + dt * (v0 - v1) / 8.0
    v = 1.5 * (p1 - p0) / dt - 0.25 * (v0 + v1)
    return p, v


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)
