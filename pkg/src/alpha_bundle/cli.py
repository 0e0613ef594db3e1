"""Command-line front end: ``alpha-bundle {tensors,geodesic,transport,verify}``.

Exit codes: 0 success, 1 numeric failure, 2 configuration failure, 3 a
verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bundle as B
from . import verify as V
from .errors import AlphaBundleError, ParseError
from .expectation import Box, SampleSpace, StatisticalFamily, Strategy
from .families import (hint_from_expressions, log_scale, make_exponential, make_family_from_expression,
                       make_normal, parse_density, reparameterize)
from .manifold import (Trajectory, christoffel_lower, christoffel_mixed, curvature_tensor, fisher_metric,
                       geodesic, sectional_curvature, skewness_tensor, speed)

log = logging.getLogger("alpha_bundle")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3
BUILTINS = {"normal": make_normal, "exponential": make_exponential}
REPARAMETERIZATIONS = {"log_scale": log_scale}


class ConfigError(Exception):
    pass


class NumericFailure(Exception):
    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


# ------------------------------------------------------------------ config

def _num(v) -> float:
    if isinstance(v, str):
        try:
            return float(v.replace("−", "-"))
        except ValueError:
            raise ConfigError(f"not a number: {v!r}") from None
    return float(v)


def parse_theta_list(text: str) -> list:
    """``"0,1;3,2"`` -> ``[[0, 1], [3, 2]]``."""
    try:
        return [[float(c) for c in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse theta list {text!r}") from None


def _vector(text: str) -> list:
    pts = parse_theta_list(text)
    if len(pts) != 1:
        raise ConfigError(f"expected a single vector, got {text!r}")
    return pts[0]


def _box(block, n) -> Box:
    try:
        lo, hi = [_num(v) for v in block["lower"]], [_num(v) for v in block["upper"]]
    except (KeyError, TypeError):
        raise ConfigError("a box needs 'lower' and 'upper' lists") from None
    if len(lo) != n or len(hi) != n:
        raise ConfigError(f"box bounds must have length {n}")
    try:
        return Box(tuple(lo), tuple(hi))
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _sample_space(block) -> SampleSpace:
    if block is None or block == "real" or (isinstance(block, dict) and block.get("kind") == "real"):
        return SampleSpace.real_line()
    if isinstance(block, dict) and block.get("kind") == "interval":
        try:
            return SampleSpace.interval(_num(block["lower"]), _num(block["upper"]))
        except (KeyError, ValueError) as err:
            raise ConfigError(f"bad interval sample space: {err}") from None
    raise ConfigError(f"unknown sample space {block!r}")


def build_family(block) -> StatisticalFamily:
    """Family from a builtin name or an expression block (see README for the schema)."""
    if block is None:
        raise ConfigError("no family given")
    if isinstance(block, str):
        block = {"builtin": block}
    if not isinstance(block, dict):
        raise ConfigError("family must be a name or an object")
    sources = [k for k in ("builtin", "expression") if k in block]
    if len(sources) != 1:
        raise ConfigError("family needs exactly one of 'builtin' or 'expression'")
    if "builtin" in block:
        if block["builtin"] not in BUILTINS:
            raise ConfigError(f"unknown builtin family {block['builtin']!r}")
        fam = BUILTINS[block["builtin"]]()
    else:
        try:
            n = int(block["n"])
            expr = parse_density(block["expression"], n)
            hint = block.get("quad_hint", {})
            quad = hint_from_expressions(str(hint.get("loc", "0")), str(hint.get("scale", "1")), n)
        except KeyError as err:
            raise ConfigError(f"expression family is missing {err}") from None
        except ParseError as err:
            raise ConfigError(f"expression: {err}") from None
        if "domain" not in block:
            raise ConfigError("expression family needs a 'domain' box")
        fam = make_family_from_expression(
            expr, _sample_space(block.get("sample_space")), _box(block["domain"], n), quad,
            name=block.get("name"), safe_box=_box(block["safe_box"], n) if "safe_box" in block else None)
    rp = block.get("reparameterize")
    if rp is not None:
        if rp not in REPARAMETERIZATIONS:
            raise ConfigError(f"unknown reparameterization {rp!r}")
        fam = reparameterize(fam, REPARAMETERIZATIONS[rp]())
    return fam


@dataclass
class RunConfig:
    family: StatisticalFamily
    alpha: float = 0.0
    thetas: list = field(default_factory=list)
    strategy: Optional[Strategy] = None
    seed: int = 0
    out: Optional[str] = None
    fmt: str = "json"
    v0: Optional[list] = None
    t_end: float = 1.0
    dt: float = 1e-3
    curve: str = "line"
    frame: Optional[list] = None
    checks: list = field(default_factory=list)
    tol: Optional[float] = None
    samples: int = 20

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.fmt not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.curve not in ("line", "geodesic"):
            raise ConfigError(f"unknown curve kind {self.curve!r}")
        for th in self.thetas:
            if len(th) != self.family.n:
                raise ConfigError(f"theta {th} does not have dimension {self.family.n}")


def _need_theta(cfg: RunConfig):
    if not cfg.thetas:
        raise ConfigError("theta grid is empty")


def load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config: {err}") from None
    if args.family:
        raw["family"] = args.family
    fam = build_family(raw.get("family"))
    thetas = raw.get("theta", raw.get("thetas"))
    if args.theta:
        thetas = parse_theta_list(args.theta)
    elif thetas is None:
        thetas = []
    elif thetas and not isinstance(thetas[0], (list, tuple)):
        thetas = [thetas]
    try:
        strategy = Strategy.parse(args.strategy or raw["strategy"]) if (args.strategy or "strategy" in raw) else None
        cfg = RunConfig(
            family=fam,
            alpha=_num(args.alpha if args.alpha is not None else raw.get("alpha", 0.0)),
            thetas=[[_num(c) for c in th] for th in thetas],
            strategy=strategy,
            seed=int(args.seed if args.seed is not None else raw.get("seed", 0)),
            out=args.out or raw.get("out"),
            fmt=args.format or raw.get("format", "json"),
            v0=_vector(args.v0) if args.v0 else raw.get("v0"),
            t_end=_num(args.t_end if args.t_end is not None else raw.get("t_end", 1.0)),
            dt=_num(args.dt if args.dt is not None else raw.get("dt", 1e-3)),
            curve=raw.get("curve", "line") if not args.curve else args.curve,
            frame=raw.get("frame"),
            checks=args.checks.split(",") if args.checks else raw.get("checks", []),
            tol=_num(args.tol) if args.tol is not None else (None if raw.get("tol") is None else _num(raw["tol"])),
            samples=int(raw.get("samples", 20)),
        )
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None
    if cfg.strategy is not None and cfg.strategy.kind == "closed" and fam.closed is None:
        raise ConfigError(f"family {fam.name} has no closed-form providers")
    return cfg


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    return repr(float(v)) if math.isfinite(v) else str(float(v))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{float(v):.17g}" for v in r])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text if text.endswith("\n") else text + "\n")
    log.info("wrote %s", p)


def _dumps(obj) -> str:
    return json.dumps(V._jsonable(obj), indent=2, sort_keys=True)


def _emit_summary(summary: dict, out: Optional[str]):
    """Next to the CSV as ``<stem>.summary.json``, or on stderr when the CSV goes to stdout."""
    if out is None:
        sys.stderr.write(_dumps(summary) + "\n")
    else:
        p = Path(out)
        _emit(_dumps(summary), str(p.with_name(p.stem + ".summary.json")))


# ----------------------------------------------------------------- commands

def tensor_record(family, theta, alpha, strategy) -> dict:
    g = fisher_metric(family, theta, strategy)
    rec = {
        "theta": theta, "alpha": alpha, "g": g,
        "T": skewness_tensor(family, theta, strategy),
        "christoffel_lower": christoffel_lower(family, theta, alpha, strategy),
        "christoffel_mixed": christoffel_mixed(family, theta, alpha, strategy),
    }
    R = curvature_tensor(family, theta, alpha, strategy)
    rec["R"] = R
    if family.n == 2:
        rec["R_1212"] = float(R[0, 1, 0, 1])
        rec["sectional_curvature"] = sectional_curvature(family, theta, alpha, strategy)
    return rec


def _flat_names(prefix, shape):
    return [prefix + "_" + "".join(str(i + 1) for i in idx) for idx in np.ndindex(*shape)]


def cmd_tensors(cfg: RunConfig) -> int:
    _need_theta(cfg)
    recs = []
    for th in cfg.thetas:
        try:
            recs.append(tensor_record(cfg.family, np.asarray(th), cfg.alpha, cfg.strategy))
        except AlphaBundleError as err:
            raise NumericFailure(str(err), th) from err
    if cfg.fmt == "json":
        _emit(_dumps({"family": cfg.family.name, "alpha": cfg.alpha,
                      "strategy": str(cfg.strategy) if cfg.strategy else "default", "points": recs}), cfg.out)
        return EXIT_OK
    n = cfg.family.n
    header = (_flat_names("theta", (n,)) + _flat_names("g", (n, n)) + _flat_names("T", (n, n, n))
              + _flat_names("Gamma", (n, n, n)) + _flat_names("Gmixed", (n, n, n)) + _flat_names("R", (n,) * 4))
    rows = [np.concatenate([np.ravel(r[k]) for k in ("theta", "g", "T", "christoffel_lower",
                                                      "christoffel_mixed", "R")]) for r in recs]
    _emit(_csv_text(header, rows), cfg.out)
    return EXIT_OK


def semicircle_center(theta, v) -> Optional[float]:
    """Centre ``c`` of the conserved ``(mu - c)^2 + 2 sigma^2`` along a normal-family
    geodesic at alpha=0; ``None`` for vertical geodesics."""
    if v[0] == 0:
        return None
    return theta[0] + 2.0 * theta[1] * v[1] / v[0]


def geodesic_summary(family, traj: Trajectory, alpha, strategy) -> dict:
    sp = speed(family, traj, strategy)
    out = {"samples": len(traj), "t_end": float(traj.t[-1]), "dt": traj.dt, "exited": traj.exited,
           "speed_drift": float(np.max(np.abs(sp - sp[0])) / sp[0]) if sp[0] > 0 else 0.0,
           "max_residual": float(np.nanmax(traj.residual)) if traj.residual.size else None}
    if family.name == "normal" and alpha == 0.0:
        c = semicircle_center(traj.theta[0], traj.velocity[0])
        if c is not None:
            inv = (traj.theta[:, 0] - c) ** 2 + 2.0 * traj.theta[:, 1] ** 2
            out["semicircle_center"] = c
            out["semicircle_drift"] = float(np.max(np.abs(inv - inv[0])) / inv[0])
    return out


def cmd_geodesic(cfg: RunConfig) -> int:
    if cfg.v0 is None:
        raise ConfigError("geodesic needs v0")
    _need_theta(cfg)
    th = cfg.thetas[0]
    try:
        traj = geodesic(cfg.family, th, cfg.v0, cfg.alpha, cfg.t_end, cfg.dt, cfg.strategy)
        summary = geodesic_summary(cfg.family, traj, cfg.alpha, cfg.strategy)
    except AlphaBundleError as err:
        raise NumericFailure(str(err), th) from err
    summary.update(theta0=th, v0=cfg.v0, alpha=cfg.alpha)
    n = cfg.family.n
    rows = np.column_stack([traj.t, traj.theta, traj.velocity, traj.residual])
    if cfg.fmt == "csv":
        header = ["t"] + _flat_names("theta", (n,)) + _flat_names("dtheta", (n,)) + ["residual"]
        _emit(_csv_text(header, rows), cfg.out)
        _emit_summary(summary, cfg.out)
    else:
        _emit(_dumps({"summary": summary, "t": traj.t, "theta": traj.theta, "velocity": traj.velocity,
                      "residual": traj.residual}), cfg.out)
    return EXIT_OK


def cmd_transport(cfg: RunConfig, velocity: Optional[list] = None, vector: Optional[list] = None) -> int:
    _need_theta(cfg)
    th0 = np.asarray(cfg.thetas[0], float)
    if velocity is None or vector is None:
        raise ConfigError("transport needs 'velocity' (curve direction) and 'vector' (vector to transport)")
    vel = np.asarray(velocity, float)
    steps = max(4, int(math.ceil(cfg.t_end / cfg.dt - 1e-9)))
    try:
        if cfg.curve == "geodesic":
            curve = geodesic(cfg.family, th0, vel, cfg.alpha, cfg.t_end, cfg.t_end / steps, cfg.strategy,
                             diagnostics=False)
        else:
            curve = Trajectory.from_function(lambda t: th0 + t * vel, lambda t: vel, cfg.t_end, steps, cfg.alpha)
            for p in curve.theta:
                cfg.family.check(p)
        u0 = B.Frame(th0, np.asarray(cfg.frame, float)) if cfg.frame is not None else None
        lift, vectors = B.transport_path(cfg.family, curve, vector, cfg.alpha, u0, cfg.strategy)
    except B.LiftDegeneracyError as err:
        raise NumericFailure(f"lift degenerated at t={err.t!r}", th0) from err
    except AlphaBundleError as err:
        raise NumericFailure(str(err), th0) from err
    n = cfg.family.n
    summary = {"theta0": th0, "alpha": cfg.alpha, "curve": cfg.curve, "velocity": vel, "vector": vector,
               "t_end": float(curve.t[-1]), "exited": curve.exited, "final_vector": vectors[-1],
               "final_frame": lift.A[-1]}
    if cfg.fmt == "csv":
        header = (["t"] + _flat_names("theta", (n,)) + _flat_names("A", (n, n)) + _flat_names("v", (n,)))
        rows = np.column_stack([curve.t, curve.theta, lift.A.reshape(len(curve), -1), vectors])
        _emit(_csv_text(header, rows), cfg.out)
        _emit_summary(summary, cfg.out)
    else:
        _emit(_dumps({"summary": summary, "t": curve.t, "theta": curve.theta, "A": lift.A,
                      "vectors": vectors}), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    try:
        reports = V.run_suite(cfg.family, cfg.checks or None, seed=cfg.seed, strategy=cfg.strategy,
                              tol=cfg.tol, samples=cfg.samples)
    except KeyError as err:
        raise ConfigError(str(err)) from None
    except AlphaBundleError as err:
        raise NumericFailure(str(err)) from err
    for rep in reports:
        log.info(rep.summary())
        if cfg.out is None:
            _emit(rep.to_json(), None)
        else:
            _emit(rep.to_json(), str(Path(cfg.out) / f"{rep.name}.json"))
    ok = all(r.passed for r in reports)
    sys.stderr.write("".join(r.summary() + "\n" for r in reports))
    return EXIT_OK if ok else EXIT_VERIFY


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alpha-bundle", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("tensors", "geodesic", "transport", "verify"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--family", help="builtin family name (overrides config)")
        s.add_argument("--alpha", type=str)
        s.add_argument("--theta", help="points as 'a,b;c,d'")
        s.add_argument("--out")
        s.add_argument("--format", choices=("json", "csv"))
        s.add_argument("--seed", type=int)
        s.add_argument("--strategy", help="closed | quad:N | mc:N[:seed]")
        s.add_argument("--v0", help="initial velocity 'a,b' (geodesic) or curve velocity (transport)")
        s.add_argument("--t-end", dest="t_end", type=str)
        s.add_argument("--dt", type=str)
        s.add_argument("--tol", type=str)
        s.add_argument("--curve", choices=("line", "geodesic"))
        s.add_argument("--vector", help="vector to transport 'a,b'")
        s.add_argument("--checks", help="comma-separated check names")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ALPHA_BUNDLE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "tensors":
            return cmd_tensors(cfg)
        if args.command == "geodesic":
            return cmd_geodesic(cfg)
        if args.command == "transport":
            raw = json.loads(Path(args.config).read_text()) if args.config else {}
            velocity = cfg.v0 if cfg.v0 is not None else raw.get("velocity")
            vector = _vector(args.vector) if args.vector else raw.get("vector")
            return cmd_transport(cfg, velocity, vector)
        return cmd_verify(cfg)
    except ConfigError as err:
        sys.stderr.write(f"config error: {err}\n")
        return EXIT_CONFIG
    except NumericFailure as err:
        where = f" at theta={list(map(float, err.theta))}" if err.theta is not None else ""
        sys.stderr.write(f"numeric failure{where}: {err}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
