"""Command-line front end: ``bcres {scan,cycle,shrink,unfold,verify}``."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .continuation import ArcSettings, ContinuationError
from .cyclealg import ConvergenceError, SingularMatrixError, linear_cycle, newton_cycle
from .mapmodel import ExampleParams, ParamPlane, map_from_json
from .shrinkfind import (
    HypothesisError,
    NoLocusError,
    NoRootError,
    ShrinkError,
    UnfoldSettings,
    build_report,
    find_shrinking_point,
    unfold_verify,
)
from .symbolic import SymbolWord, rotational_word
from .tonguescan import GridSpec, ScanSettings, scan
from .verify import run_suites

log = logging.getLogger("bcres")

SCHEMA = 1
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER, EXIT_NO_ROOT, EXIT_HYPOTHESIS = 0, 1, 2, 3, 4, 5, 6


class ConfigError(ValueError):
    pass


# --- config ----------------------------------------------------------------

TOP_KEYS = {"schema", "map", "plane", "scan", "cycle", "shrink", "unfold", "verify"}
BLOCK_KEYS = {
    "plane": {"x", "y", "ties"},
    "scan": {"x_range", "y_range", "resolution", "transient", "max_period", "tol", "escape_radius", "x0"},
    "cycle": {"word", "flip", "shift", "tol", "max_iter", "tol_zero", "x0"},
    "shrink": {"word", "box", "grid", "tol", "location"},
    "unfold": {"mu", "mu_start", "step", "max_step", "min_step", "max_steps", "radius_factor",
               "tangency_tol", "common_point_tol"},
    "verify": {"instances", "n_max_symbolic"},
}
POSITIVE = {"tol", "tol_zero", "escape_radius", "step", "max_step", "min_step", "mu_start",
            "radius_factor", "tangency_tol", "common_point_tol", "instances"}


def _check_keys(block: dict, allowed: set, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    for k in block:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in {where}")
    for k in POSITIVE & set(block):
        v = block[k]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise ConfigError(f"{where}.{k} must be a positive number, got {v!r}")


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate(cfg)
    return cfg


def validate(cfg: dict):
    _check_keys(cfg, TOP_KEYS, "config")
    if cfg.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {cfg['schema']!r}")
    for name, keys in BLOCK_KEYS.items():
        if name in cfg:
            _check_keys(cfg[name], keys, name)
    if "map" in cfg:
        try:
            map_from_json(cfg["map"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad map: {exc}") from exc


def apply_mu(cfg: dict, mu: float | None) -> dict:
    cfg = copy.deepcopy(cfg)
    if mu is not None:
        cfg.setdefault("map", {"family": "dns"})["mu"] = mu
        if "unfold" in cfg:
            cfg["unfold"]["mu"] = mu
    return cfg


def _family(cfg: dict) -> ExampleParams:
    m = cfg.get("map", {"family": "dns"})
    if m.get("family") != "dns":
        raise ConfigError("this command needs the example family ({\"family\": \"dns\", ...})")
    vals = {k: v for k, v in m.items() if k != "family"}
    try:
        return ExampleParams(**vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad family parameters: {exc}") from exc


def _plane(cfg: dict) -> ParamPlane:
    block = cfg.get("plane", {})
    try:
        return ParamPlane(_family(cfg), block.get("x", "omega_R"), block.get("y", "s_R"),
                          tuple(tuple(t) for t in block.get("ties", [["omega_L", "omega_R"]])))
    except ValueError as exc:
        raise ConfigError(f"bad plane: {exc}") from exc


def _word(spec) -> SymbolWord:
    try:
        if isinstance(spec, str):
            return SymbolWord.parse(spec)
        if isinstance(spec, dict) and set(spec) == {"l", "m", "n"}:
            return rotational_word(spec["l"], spec["m"], spec["n"])
    except ValueError as exc:
        raise ConfigError(f"bad word: {exc}") from exc
    raise ConfigError("word must be a string over {L,R} or {\"l\":..,\"m\":..,\"n\":..}")


def _need(cfg: dict, block: str) -> dict:
    if block not in cfg:
        raise ConfigError(f"missing block {block!r}")
    return cfg[block]


# --- output ----------------------------------------------------------------


def _envelope(cfg: dict, command: str, payload: dict) -> dict:
    return {"schema": SCHEMA, "tool": "bcres", "version": __version__, "command": command,
            "config": cfg, "result": payload}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_atomic(path: str, text: str):
    """Write through a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj: dict):
    write_atomic(path, json.dumps(obj, indent=1, default=_json_default) + "\n")


def write_csv(path: str, header, rows, comment: str | None = None):
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    write_atomic(path, buf.getvalue())


def _provenance(cfg: dict) -> str:
    return f"bcres {__version__} schema {SCHEMA} config {json.dumps(cfg, sort_keys=True)}"


# --- commands --------------------------------------------------------------


def cmd_scan(cfg: dict, out: str, threads: int = 1) -> int:
    block = _need(cfg, "scan")
    plane = _plane(cfg)
    try:
        res = block.get("resolution", [100, 100])
        spec = GridSpec(plane, tuple(block["x_range"]), tuple(block["y_range"]), int(res[0]), int(res[1]))
        settings = ScanSettings(int(block.get("transient", 10_000)), int(block.get("max_period", 30)),
                                float(block.get("tol", 1e-8)), block.get("escape_radius"),
                                tuple(block["x0"]) if "x0" in block else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scan block: {exc}") from exc
    grid = scan(spec, settings, threads=threads)
    write_csv(os.path.join(out, "scan.csv"), ["param_x", "param_y", "period"], grid.rows(),
              _provenance(cfg))
    vals, counts = np.unique(grid.period, return_counts=True)
    payload = {"grid": spec.to_json(),
               "settings": {"transient": settings.transient, "max_period": settings.max_period,
                            "tol": settings.tol, "escape_radius": settings.radius(plane.mu),
                            "x0": list(settings.x0) if settings.x0 else "origin",
                            "switching_manifold_side": "R"},
               "counts": {str(int(v)): int(c) for v, c in zip(vals, counts)}}
    write_json(os.path.join(out, "scan.json"), _envelope(cfg, "scan", payload))
    print(f"scan: {spec.nx}x{spec.ny} cells written to {os.path.join(out, 'scan.csv')}")
    return EXIT_OK


def cmd_cycle(cfg: dict, out: str, threads: int = 1) -> int:
    block = _need(cfg, "cycle")
    try:
        fmap = map_from_json(cfg.get("map", {"family": "dns"}))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad map: {exc}") from exc
    word = _word(block.get("word"))
    if "shift" in block:
        word = word.shift(int(block["shift"]))
    if "flip" in block:
        word = word.flip(int(block["flip"]))
    tol_zero = float(block.get("tol_zero", 1e-10))
    if fmap.is_linear:
        cyc = linear_cycle(fmap, word, tol_zero=tol_zero)
    else:
        cyc = newton_cycle(fmap, word, block.get("x0"), tol=float(block.get("tol", 1e-12)),
                           max_iter=int(block.get("max_iter", 50)), tol_zero=tol_zero)
    payload = {"map": fmap.to_json(), "method": "linear" if fmap.is_linear else "newton", "cycle": cyc.to_json()}
    write_json(os.path.join(out, "cycle.json"), _envelope(cfg, "cycle", payload))
    print(f"cycle {word}: admissible={cyc.admissible} stability={cyc.stability.value}")
    return EXIT_OK


def _locate(cfg: dict):
    block = _need(cfg, "shrink")
    plane = _plane(cfg)
    word = _word(block.get("word"))
    if word.rotation is None:
        raise ConfigError("shrink.word must be given as {\"l\":..,\"m\":..,\"n\":..}")
    if "location" in block:
        return plane, build_report(plane, word, block["location"])
    try:
        box = tuple(tuple(map(float, b)) for b in block["box"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"shrink.box must be [[x0,x1],[y0,y1]]: {exc}") from exc
    return plane, find_shrinking_point(plane, word, box, grid=int(block.get("grid", 5)),
                                       tol=float(block.get("tol", 1e-12)))


def cmd_shrink(cfg: dict, out: str, threads: int = 1) -> int:
    _, rep = _locate(cfg)
    write_json(os.path.join(out, "shrink.json"), _envelope(cfg, "shrink", rep.to_json()))
    worst = max(rep.residuals.values())
    print(f"shrinking point {rep.word} at {rep.location}: max residual {worst:.2e}, "
          f"sign pattern {'ok' if rep.sign_pattern else 'VIOLATED'}")
    if not rep.sign_pattern or not rep.admissible or worst > 1e-8:
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_unfold(cfg: dict, out: str, threads: int = 1) -> int:
    block = _need(cfg, "unfold")
    plane, rep = _locate(cfg)
    if "mu" not in block:
        raise ConfigError("unfold.mu is required")
    mu = float(block["mu"])
    arc = ArcSettings(step=float(block.get("step", 1e-4)), min_step=float(block.get("min_step", 1e-9)),
                      max_step=float(block.get("max_step", 2e-3)),
                      max_steps=int(block.get("max_steps", 2000)))
    settings = UnfoldSettings(arc=arc, mu_start=float(block.get("mu_start", 1 / 64)),
                              radius_factor=float(block.get("radius_factor", 1.5)),
                              tangency_tol=float(block.get("tangency_tol", 1e-3)),
                              common_point_tol=float(block.get("common_point_tol", 1e-6)))
    uf = unfold_verify(plane, rep, mu, settings)
    write_json(os.path.join(out, "unfold.json"), _envelope(cfg, "unfold", uf.to_json()))
    write_csv(os.path.join(out, "unfold_curves.csv"), ["curve_id", "param_x", "param_y", "residual"],
              uf.curve_rows(), _provenance(cfg))
    print(f"unfold mu={mu}: O spread {uf.O_spread:.1e}, tangency {max(uf.tangency_angles.values()):.1e} rad, "
          f"theta1={uf.theta1:.4f} theta2={uf.theta2:.4f}, probes {'ok' if uf.probes_ok else 'FAILED'}")
    return EXIT_OK if uf.ok else EXIT_VERIFY


def cmd_verify(cfg: dict, out: str | None, threads: int = 1) -> int:
    block = cfg.get("verify", {})
    results = run_suites(int(block.get("instances", 1000)),
                         n_max_symbolic=int(block.get("n_max_symbolic", 50)))
    for r in results:
        print(r.line())
    if out is not None:
        write_json(os.path.join(out, "verify.json"),
                   _envelope(cfg, "verify", {"suites": [r.to_json() for r in results]}))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {"scan": cmd_scan, "cycle": cmd_cycle, "shrink": cmd_shrink, "unfold": cmd_unfold,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bcres", description=__doc__)
    p.add_argument("--version", action="version", version=f"bcres {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file", required=name != "verify")
        s.add_argument("--out", default=".", help="output directory (default: .)")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--mu", type=float, help="override map mu (and unfold mu)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = apply_mu(cfg, args.mu)
        validate(cfg)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoRootError as exc:
        print(f"no root: {exc}", file=sys.stderr)
        return EXIT_NO_ROOT
    except HypothesisError as exc:
        print(f"hypotheses violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ConvergenceError, SingularMatrixError, ContinuationError, NoLocusError, ShrinkError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
