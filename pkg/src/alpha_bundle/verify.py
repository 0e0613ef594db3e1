"""Named residual checks comparing bundle-side and chart-side geometry.

Each check draws its samples from its own seeded generator and returns a
:class:`CheckReport`.  Sample ``k`` uses ``alphas[k % len(alphas)]``.  Numeric
failures inside a sample are recorded on that sample (residual ``inf``) rather
than raised.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from . import bundle as B
from .errors import AlphaBundleError
from .expectation import StatisticalFamily, Strategy, resolve
from .manifold import (Trajectory, christoffel_mixed, covariant_derivative, curvature_apply,
                       curvature_tensor, fisher_metric, geodesic)
from .numerics import FORM_STEP, sample_derivative

DEFAULT_ALPHAS = (-1.0, -0.5, 0.0, 0.5, 1.0)
FRAME_DET_MIN = 0.1

Tolerance = Union[float, Mapping[str, float]]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


@dataclass
class CheckReport:
    """Outcome of one check.

    ``tolerance`` is a single bound or a per-residual mapping.  ``passed`` holds
    when every residual is within its bound and every entry of ``conditions``
    (e.g. a convergence-order requirement) is true.
    """

    name: str
    tolerance: Tolerance
    seed: int
    samples: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)

    def bound(self, key: str) -> float:
        if isinstance(self.tolerance, Mapping):
            return float(self.tolerance[key])
        return float(self.tolerance)

    def add(self, residuals: dict, **descriptor) -> dict:
        rec = {"residuals": {k: float(v) for k, v in residuals.items()}, **descriptor}
        self.samples.append(rec)
        return rec

    def worst(self, key: Optional[str] = None) -> float:
        vals = [v for s in self.samples for k, v in s["residuals"].items() if key is None or k == key]
        if not vals:
            return 0.0
        return math.inf if any(math.isnan(v) for v in vals) else max(vals)

    @property
    def max_residual(self) -> float:
        return self.worst()

    @property
    def passed(self) -> bool:
        within = all(not math.isnan(v) and v <= self.bound(k)
                     for s in self.samples for k, v in s["residuals"].items())
        return within and all(self.conditions.values())

    def to_dict(self) -> dict:
        tol = dict(self.tolerance) if isinstance(self.tolerance, Mapping) else self.tolerance
        return _jsonable({
            "name": self.name,
            "tolerance": tol,
            "max_residual": self.max_residual,
            "pass": self.passed,
            "seed": self.seed,
            "conditions": self.conditions,
            "extras": self.extras,
            "samples": self.samples,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} max_residual={self.max_residual:.3e}"


# ------------------------------------------------------------------ sampling

def random_frame(rng: np.random.Generator, theta, det_min: float = FRAME_DET_MIN) -> B.Frame:
    n = len(theta)
    while True:
        A = rng.uniform(-1.0, 1.0, (n, n))
        if abs(np.linalg.det(A)) >= det_min:
            return B.Frame(theta, A)


def random_group_element(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random ``g`` with ``0.1 <= |det g| <= 10``."""
    while True:
        g = rng.uniform(-2.0, 2.0, (n, n))
        if 0.1 <= abs(np.linalg.det(g)) <= 10.0:
            return g


def _draw(rng, family):
    theta = family.default_safe_box().sample(rng)
    return theta, random_frame(rng, theta)


def _describe(u: B.Frame, alpha, **vectors) -> dict:
    return {"theta": u.theta, "A": u.A, "alpha": float(alpha), **vectors}


def _failed(report: CheckReport, keys, err: Exception, **descriptor):
    rec = report.add({k: math.inf for k in keys}, **descriptor)
    rec["error"] = f"{type(err).__name__}: {err}"


class _AffineField:
    """Chart field ``theta -> base + slope @ (theta - origin)``."""

    def __init__(self, base, slope, origin):
        self.base, self.slope, self.origin = (np.asarray(a, float) for a in (base, slope, origin))

    def __call__(self, theta):
        return self.base + self.slope @ (np.asarray(theta, float) - self.origin)


# ------------------------------------------------- chart versus bundle identities

CHART_BUNDLE_TOL = {"covariant": 1e-6, "torsion": 1e-5, "curvature": 1e-4}


def normal_identity_frame_cases(family: StatisticalFamily, alphas=DEFAULT_ALPHAS, sigmas=(1.0, 2.0),
                                strategy: Optional[Strategy] = None) -> list:
    """Coordinate-field covariant derivatives at identity frames over ``(0, sigma)``
    against the closed-form normal-family values."""
    out = []
    for a in alphas:
        for s in sigmas:
            u = B.Frame.identity([0.0, s])
            expected = {
                "d1_d1": ([1, 0], [1, 0], [0.0, (1 - a) / (2 * s)]),
                "d1_d2": ([1, 0], [0, 1], [-(1 + a) / s, 0.0]),
                "d2_d2": ([0, 1], [0, 1], [0.0, -(1 + 2 * a) / s]),
            }
            for key, (X, Y, want) in expected.items():
                got = B.bundle_covariant_derivative(family, X, Y, u, a, strategy)
                out.append({"case": key, "alpha": a, "sigma": s, "value": got, "expected": want,
                            "residual": float(np.max(np.abs(got - np.asarray(want))))})
    return out


def check_theorem_5_8(family: StatisticalFamily, samples: int = 20, alphas: Sequence[float] = DEFAULT_ALPHAS,
                      seed: int = 0, tol: Tolerance = None, strategy: Optional[Strategy] = None,
                      identity_cases: Optional[bool] = None) -> CheckReport:
    """Bundle-side covariant derivative, torsion and curvature against the chart side.

    Vector fields are random affine chart fields, so ``nabla`` and brackets have
    nontrivial derivative terms.  ``identity_cases`` adds the closed-form normal
    family values at identity frames (default: on when the family is ``normal``).
    """
    strategy = resolve(family, strategy)
    report = CheckReport("theorem_5_8", dict(CHART_BUNDLE_TOL) if tol is None else tol, seed)
    rng = np.random.default_rng(seed)
    n = family.n
    for k in range(samples):
        a = alphas[k % len(alphas)]
        theta, u = _draw(rng, family)
        X = _AffineField(rng.uniform(-1, 1, n), rng.uniform(-1, 1, (n, n)), theta)
        Y = _AffineField(rng.uniform(-1, 1, n), rng.uniform(-1, 1, (n, n)), theta)
        Z = rng.uniform(-1, 1, n)
        desc = _describe(u, a, X=X.base, dX=X.slope, Y=Y.base, dY=Y.slope, Z=Z)
        try:
            G = christoffel_mixed(family, theta, a, strategy)
            nab_XY = covariant_derivative(G, X.base, Y.base, Y.slope)
            nab_YX = covariant_derivative(G, Y.base, X.base, X.slope)
            lie = Y.slope @ X.base - X.slope @ Y.base
            covariant = B.bundle_covariant_derivative(family, X, Y, u, a, strategy) - nab_XY
            torsion = u(B.torsion_form_eval(family, u, X, Y, a, strategy)) - (nab_XY - nab_YX - lie)
            R = curvature_tensor(family, theta, a, strategy)
            g = fisher_metric(family, theta, strategy)
            curvature = (B.curvature_via_bundle(family, u, X, Y, Z, a, strategy)
                    - curvature_apply(R, g, X.base, Y.base, Z))
        except AlphaBundleError as err:
            _failed(report, CHART_BUNDLE_TOL, err, **desc)
            continue
        report.add({"covariant": np.linalg.norm(covariant), "torsion": np.linalg.norm(torsion),
                    "curvature": np.linalg.norm(curvature)}, **desc)
    if identity_cases is None:
        identity_cases = family.name == "normal"
    if identity_cases:
        cases = normal_identity_frame_cases(family, alphas, strategy=strategy)
        report.extras["identity_frame_cases"] = cases
        report.conditions["identity_frame_cases"] = all(c["residual"] <= 1e-6 for c in cases)
    return report


# ----------------------------------------------------- structure equations

def _halving(report: CheckReport, totals_h, totals_half, min_ratio: float):
    top, half = max(totals_h), max(totals_half)
    ratio = math.inf if half == 0 else top / half
    report.extras["halving"] = {"max_total_step": top, "max_total_half_step": half, "ratio": ratio,
                                "min_ratio": min_ratio}
    # identities that hold to round-off at the default step leave nothing to converge
    report.conditions["step_halving"] = bool(ratio >= min_ratio or top <= 1e-12)


def check_structure_equations(family: StatisticalFamily, samples: int = 20,
                              alphas: Sequence[float] = DEFAULT_ALPHAS, seed: int = 0, tol: Tolerance = 1e-4,
                              strategy: Optional[Strategy] = None, step: float = FORM_STEP,
                              min_ratio: float = 4.0) -> CheckReport:
    """Both structure equations on horizontal/horizontal, horizontal/vertical and
    vertical/vertical pairs, at ``step`` and ``step / 2``."""
    strategy = resolve(family, strategy)
    report = CheckReport("structure_equations", tol, seed)
    report.extras["step"] = step
    rng = np.random.default_rng(seed)
    n = family.n
    keys = [f"{eq}_{pair}" for pair in ("HH", "HV", "VV") for eq in ("first", "second")]
    totals = ([], [])
    for k in range(samples):
        a = alphas[k % len(alphas)]
        theta, u = _draw(rng, family)
        xi1, xi2 = rng.uniform(-1, 1, (2, n))
        C1, C2 = rng.uniform(-1, 1, (2, n, n))
        desc = _describe(u, a, xi1=xi1, xi2=xi2, C1=C1, C2=C2)
        try:
            res = []
            for j, h in enumerate((step, step / 2)):
                fc = B.FormCalculus(family, a, strategy, step=h)
                H1, H2 = fc.H(xi1)(u), fc.H(xi2)(u)
                V1, V2 = B.fundamental_vertical(u, C1), B.fundamental_vertical(u, C2)
                r = (fc.structure_residuals(u, H1, H2) + fc.structure_residuals(u, H1, V1)
                     + fc.structure_residuals(u, V1, V2))
                totals[j].append(sum(r))
                res.append(r)
        except AlphaBundleError as err:
            _failed(report, keys, err, **desc)
            continue
        rec = report.add(dict(zip(keys, res[0])), **desc)
        rec["half_step_residuals"] = dict(zip(keys, res[1]))
    if totals[0]:
        _halving(report, totals[0], totals[1], min_ratio)
    return report


def check_bianchi(family: StatisticalFamily, samples: int = 20, alphas: Sequence[float] = DEFAULT_ALPHAS,
                  seed: int = 0, tol: Tolerance = 1e-3, strategy: Optional[Strategy] = None,
                  step: float = FORM_STEP, min_ratio: float = 4.0) -> CheckReport:
    """Both Bianchi identities on random triples of fundamental horizontal fields,
    plus a repeated-vector triple that must give exactly zero."""
    strategy = resolve(family, strategy)
    report = CheckReport("bianchi", tol, seed)
    report.extras["step"] = step
    rng = np.random.default_rng(seed)
    n = family.n
    keys = ["first", "second", "repeated"]
    totals = ([], [])
    for k in range(samples):
        a = alphas[k % len(alphas)]
        theta, u = _draw(rng, family)
        xis = rng.uniform(-1, 1, (3, n))
        desc = _describe(u, a, xis=xis)
        try:
            first, second = B.bianchi_residuals(family, u, xis, a, strategy, step)
            f2, s2 = B.bianchi_residuals(family, u, xis, a, strategy, step / 2)
            rep = sum(B.bianchi_residuals(family, u, [xis[0], xis[0], xis[1]], a, strategy, step))
        except AlphaBundleError as err:
            _failed(report, keys, err, **desc)
            continue
        totals[0].append(first + second)
        totals[1].append(f2 + s2)
        rec = report.add({"first": first, "second": second, "repeated": rep}, **desc)
        rec["half_step_residuals"] = {"first": f2, "second": s2}
    if totals[0]:
        _halving(report, totals[0], totals[1], min_ratio)
    return report


# ----------------------------------------------------- frame and form identities

FRAME_FORM_TOL = {"canonical": 1e-12, "equivariance": 1e-12, "connection_equivariance": 1e-10,
                  "bracket": 1e-4, "lift_translation": 1e-8}


def check_lemma_5_6(family: StatisticalFamily, samples: int = 20, alphas: Sequence[float] = DEFAULT_ALPHAS,
                    seed: int = 0, tol: Tolerance = None, strategy: Optional[Strategy] = None,
                    lift_steps: int = 50) -> CheckReport:
    """Fundamental horizontal fields: canonical value, right-equivariance and the
    bracket with fundamental vertical fields; right-translation of curve lifts;
    equivariance of the bundle connection form."""
    strategy = resolve(family, strategy)
    report = CheckReport("lemma_5_6", dict(FRAME_FORM_TOL) if tol is None else tol, seed)
    rng = np.random.default_rng(seed)
    n = family.n
    box = family.default_safe_box()
    width = np.asarray(box.upper, float) - np.asarray(box.lower, float)
    for k in range(samples):
        a = alphas[k % len(alphas)]
        theta, u = _draw(rng, family)
        xi = rng.uniform(-1, 1, n)
        C = rng.uniform(-1, 1, (n, n))
        g = random_group_element(rng, n)
        Xt = B.BundleTangent(rng.uniform(-1, 1, n), rng.uniform(-1, 1, (n, n)))
        # straight segment that stays inside the safe box
        end = box.sample(rng)
        desc = _describe(u, a, xi=xi, C=C, g=g, X_base=Xt.base, X_mat=Xt.mat, segment_end=end)
        try:
            Hu = B.fundamental_horizontal(family, u, xi, a, strategy)
            canonical = np.linalg.norm(B.canonical_form(u, Hu) - xi)

            ug = u.right(g)
            pushed = Hu.pushed_right(g)
            target = B.fundamental_horizontal(family, ug, np.linalg.solve(g, xi), a, strategy)
            equi = (pushed - target).norm()

            w_push = B.bundle_connection_form(family, ug, Xt.pushed_right(g), a, strategy)
            w = B.bundle_connection_form(family, u, Xt, a, strategy)
            conn_equi = np.linalg.norm(w_push - np.linalg.solve(g, w @ g))

            br = B.bracket(B.vertical_field(C), B.horizontal_field(family, xi, a, strategy), u)
            bracket_res = (br - B.fundamental_horizontal(family, u, C @ xi, a, strategy)).norm()

            seg = Trajectory.from_function(lambda t: theta + t * (end - theta), lambda t: end - theta,
                                           1.0, lift_steps, a)
            lift = B.horizontal_lift_curve(family, seg, u, a, strategy)
            lift_g = B.horizontal_lift_curve(family, seg, ug, a, strategy)
            translation = float(np.max(np.abs(lift_g.A - lift.A @ g)))
        except AlphaBundleError as err:
            _failed(report, FRAME_FORM_TOL, err, **desc)
            continue
        report.add({"canonical": canonical, "equivariance": equi, "connection_equivariance": conn_equi,
                    "bracket": bracket_res, "lift_translation": translation}, **desc)
    report.extras["segment_box_width"] = width
    return report


# ----------------------------------------------------- geodesic criterion

def lifted_velocity_drift(family: StatisticalFamily, curve: Trajectory, alpha: float,
                          u0: Optional[B.Frame] = None, strategy: Optional[Strategy] = None) -> np.ndarray:
    """``|d/dt theta(lift')|`` per sample along the horizontal lift of ``curve``."""
    if u0 is None:
        u0 = B.Frame.identity(curve.theta[0])
    lift = B.horizontal_lift_curve(family, curve, u0, alpha, strategy)
    xi = np.linalg.solve(lift.A, curve.velocity[..., None])[..., 0]
    dt = float(curve.t[1] - curve.t[0])
    return np.linalg.norm(sample_derivative(xi, dt), axis=1)


def perturbed_curve(curve: Trajectory, amplitude: float = 0.1, direction=None) -> Trajectory:
    """``curve + amplitude * sin(pi t / T) * direction`` with the same endpoints."""
    n = curve.theta.shape[1]
    d = np.eye(n)[-1] if direction is None else np.asarray(direction, float)
    T = curve.t[-1]
    bump = np.sin(np.pi * curve.t / T)[:, None] * d
    dbump = (np.pi / T) * np.cos(np.pi * curve.t / T)[:, None] * d
    return Trajectory(curve.t, curve.theta + amplitude * bump, curve.velocity + amplitude * dbump,
                      alpha=curve.alpha, dt=curve.dt)


def check_geodesic_criterion(family: StatisticalFamily, theta0, v0, alpha: float, tol: float = 1e-5,
                             t_end: float = 1.0, dt: float = 1e-3, strategy: Optional[Strategy] = None,
                             control_amplitude: float = 0.1, control_factor: float = 100.0,
                             control_floor: float = 1e-2) -> CheckReport:
    """Velocity read in the lifted frame is constant along a geodesic and not along
    a perturbed control curve with the same endpoints."""
    strategy = resolve(family, strategy)
    report = CheckReport("geodesic_criterion", tol, 0)
    gamma = geodesic(family, theta0, v0, alpha, t_end, dt, strategy, diagnostics=False)
    desc = {"theta0": np.asarray(theta0, float), "v0": np.asarray(v0, float), "alpha": float(alpha),
            "t_end": float(gamma.t[-1]), "dt": gamma.dt, "exited": gamma.exited}
    geo = float(np.max(lifted_velocity_drift(family, gamma, alpha, strategy=strategy)))
    report.add({"geodesic": geo}, **desc)
    if np.any(gamma.velocity):
        control = float(np.max(lifted_velocity_drift(family, perturbed_curve(gamma, control_amplitude),
                                                     alpha, strategy=strategy)))
        ratio = math.inf if geo == 0 else control / geo
        report.extras.update(control=control, control_ratio=ratio, control_amplitude=control_amplitude)
        report.conditions["control_separated"] = bool(control >= control_floor and ratio >= control_factor)
    return report


# -------------------------------------------------------------- gauge law

def gauge_law_residual(family: StatisticalFamily, reparam: StatisticalFamily, theta_new, X_new, alpha: float,
                       strategy: Optional[Strategy] = None) -> float:
    """``| omega'(X') - (J^-1 omega(J X') J + J^-1 dJ(X')) |`` with ``J = d theta / d theta'``."""
    r = reparam.metadata["reparameterization"]
    theta_new, X_new = np.asarray(theta_new, float), np.asarray(X_new, float)
    theta = np.asarray(r.inverse(theta_new), float)
    J = r.transition(theta_new)
    dJ = np.einsum("maj,m->aj", r.transition_derivative(theta_new), X_new)
    lhs = B.local_connection_form(reparam, theta_new, alpha, strategy)(X_new)
    rhs = np.linalg.solve(J, B.local_connection_form(family, theta, alpha, strategy)(J @ X_new) @ J + dJ)
    return float(np.linalg.norm(lhs - rhs))


def check_gauge_law(family: StatisticalFamily, reparameterization=None, samples: int = 20,
                    alphas: Sequence[float] = DEFAULT_ALPHAS, seed: int = 0, tol: Tolerance = None,
                    strategy: Optional[Strategy] = None) -> CheckReport:
    """Connection forms of two charts related by the gauge law, and the chart
    independence of ``R_1212 / det g`` (two-dimensional families)."""
    from .families import log_scale, reparameterize

    r = reparameterization or log_scale(family.n - 1)
    other = reparameterize(family, r)
    report = CheckReport("gauge_law", {"gauge": 1e-5, "invariant": 1e-4} if tol is None else tol, seed)
    rng = np.random.default_rng(seed)
    for k in range(samples):
        a = alphas[k % len(alphas)]
        theta = family.default_safe_box().sample(rng)
        theta_new = np.asarray(r.forward(theta), float)
        X_new = rng.uniform(-1, 1, family.n)
        desc = {"theta": theta, "theta_new": theta_new, "X_new": X_new, "alpha": float(a)}
        res = {"gauge": gauge_law_residual(family, other, theta_new, X_new, a, strategy)}
        if family.n == 2:
            inv = []
            for fam, th in ((family, theta), (other, theta_new)):
                st = strategy if fam is family else None
                inv.append(curvature_tensor(fam, th, a, st)[0, 1, 0, 1] / np.linalg.det(fisher_metric(fam, th, st)))
            res["invariant"] = abs(inv[0] - inv[1])
        report.add(res, **desc)
    return report


# ----------------------------------------------------------- transport oracle

def transport_oracle_matrix(t: float) -> np.ndarray:
    """``exp(-t M)`` for ``M = [[0, -1], [1/2, 0]]``: the lift along ``(t, 1)`` at ``alpha = 0``."""
    return expm(-t * np.array([[0.0, -1.0], [0.5, 0.0]]))


SUITE = {
    "theorem_5_8": check_theorem_5_8,
    "structure_equations": check_structure_equations,
    "bianchi": check_bianchi,
    "lemma_5_6": check_lemma_5_6,
}
OPTIONAL = {"gauge_law": check_gauge_law}


def run_suite(family: StatisticalFamily, names: Optional[Sequence[str]] = None, seed: int = 0,
              strategy: Optional[Strategy] = None, tol: Optional[float] = None, samples: int = 20,
              alphas: Sequence[float] = DEFAULT_ALPHAS) -> list:
    """Run the named checks; by default every sample-based check in ``SUITE`` plus
    an alpha=0 geodesic criterion from the middle of the safe box."""
    names = list(SUITE) + ["geodesic_criterion"] if not names else list(names)
    reports = []
    for name in names:
        kw = {} if tol is None else {"tol": tol}
        if name == "geodesic_criterion":
            box = family.default_safe_box()
            lo, hi = np.asarray(box.lower, float), np.asarray(box.upper, float)
            theta0 = 0.5 * (lo + hi)
            v0 = 0.1 * (hi - lo)
            reports.append(check_geodesic_criterion(family, theta0, v0, 0.0, strategy=strategy, **kw))
        elif name in SUITE or name in OPTIONAL:
            reports.append({**SUITE, **OPTIONAL}[name](family, samples=samples, alphas=alphas, seed=seed,
                                       strategy=strategy, **kw))
        else:
            raise KeyError(f"unknown check {name!r}")
    return reports
