"""Command-line entry point.

    cbfcompose run --preset paper-2veh-turn -o out/
    cbfcompose run --config my.cfg --mode decentralized -o out/ --figures
    cbfcompose counterexample
    cbfcompose verify [--quick]
"""

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

import numpy as np

from .barrier import EvadingManeuver
from .dynamics import ControlBounds
from .errors import CbfError, ConfigError
from .safety import SafetyKind
from .scenario import PRESETS, Mode, ScenarioConfig, build_circle_scenario, preset
from .supervisor import AlphaFunction

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2

# key -> (parser, help); every key is optional when "preset" is given
CONFIG_KEYS = {
    "preset": (str, "start from a compiled-in preset"),
    "name": (str, "scenario label"),
    "k": (int, "vehicle count"),
    "radius": (float, "start circle radius [m]"),
    "psi_deg": (float, "heading offset from the origin [deg]"),
    "v_min": (float, "[m/s]"),
    "v_max": (float, "[m/s]"),
    "omega_max_deg": (float, "[deg/s]"),
    "d_s": (float, "safety distance [m]"),
    "delta": (float, "heading regularizer [m^2]"),
    "kappa": (float, "linear class-K gain [1/s]"),
    "safety": (str, "euclidean_sq | adjusted_sq | adjusted_sqrt | plain_sqrt"),
    "maneuver": (str, "turn | straight"),
    "maneuver_v": (float, "turn base speed [m/s]"),
    "maneuver_omega_deg": (float, "turn rate [deg/s], sign picks the direction"),
    "sigma": (str, "comma separated per-vehicle speed multipliers (turn)"),
    "speeds": (str, "comma separated per-vehicle speeds [m/s] (straight)"),
    "dt": (float, "[s]"),
    "t_end": (float, "[s]"),
    "mode": (str, "centralized | decentralized"),
    "lambda": (float, "nominal controller look-ahead [m]"),
    "kp": (float, "nominal controller gain [1/s]"),
    "fallback_maneuver": (str, "true | false"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines (``#`` comments) into a dict of typed values."""
    out, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        ctx = f"{source}:{lineno}: "
        if "=" not in line:
            raise ConfigError(f"{ctx}expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{ctx}unknown key {key!r}; known keys: {', '.join(CONFIG_KEYS)}")
        if key in out:
            raise ConfigError(f"{ctx}duplicate key {key!r} (first set on line {where[key]})")
        conv = CONFIG_KEYS[key][0]
        try:
            out[key] = conv(value)
        except ValueError:
            raise ConfigError(f"{ctx}{key} = {value!r} is not a valid {conv.__name__}") from None
        where[key] = lineno
    return out, where


def _floats(text, key):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma separated numbers, got {text!r}") from None


def config_from_mapping(values, where=None, source="<config>"):
    """Build a :class:`ScenarioConfig` from parsed config values."""
    where = where or {}

    def ctx(key):
        return f"{source}:{where[key]}: " if key in where else f"{source}: "

    base = preset(values["preset"]) if "preset" in values else None
    if base is None:
        missing = [k for k in ("k", "v_min", "v_max", "omega_max_deg", "d_s", "maneuver", "safety") if k not in values]
        if missing:
            raise ConfigError(f"{source}: without a preset these keys are required: {', '.join(missing)}")

    def get(key, fallback):
        return values.get(key, fallback)

    k = get("k", base.k if base else None)
    if base and "k" in values and values["k"] != base.k and not ({"sigma", "speeds"} & set(values)):
        raise ConfigError(f"{ctx('k')}changing k needs a matching sigma or speeds list")
    try:
        bounds = ControlBounds(
            get("v_min", base.bounds.v_min if base else None),
            get("v_max", base.bounds.v_max if base else None),
            math.radians(values["omega_max_deg"]) if "omega_max_deg" in values else base.bounds.omega_max,
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    kind = values.get("maneuver")
    if kind is None:
        maneuver = base.maneuver
    elif kind == "turn":
        v = get("maneuver_v", 0.9 * bounds.v_min + 0.1 * bounds.v_max)
        w = math.radians(values["maneuver_omega_deg"]) if "maneuver_omega_deg" in values else 0.9 * bounds.omega_max
        sigma = _floats(values["sigma"], "sigma") if "sigma" in values else [1.0] * k
        maneuver = _maneuver(lambda: EvadingManeuver.turn(v, w, sigma), ctx("maneuver"))
    elif kind == "straight":
        if "speeds" in values:
            speeds = _floats(values["speeds"], "speeds")
        else:
            v = get("maneuver_v", 0.9 * bounds.v_min + 0.1 * bounds.v_max)
            speeds = [(1 + 0.01 * i) * v for i in range(1, k + 1)]
        maneuver = _maneuver(lambda: EvadingManeuver.straight(speeds), ctx("maneuver"))
    else:
        raise ConfigError(f"{ctx('maneuver')}maneuver must be 'turn' or 'straight', got {kind!r}")

    try:
        safety = SafetyKind(values["safety"]) if "safety" in values else base.safety_kind
    except ValueError:
        raise ConfigError(f"{ctx('safety')}unknown safety kind {values['safety']!r}") from None
    try:
        mode = Mode(values["mode"]) if "mode" in values else (base.mode if base else Mode.CENTRALIZED)
    except ValueError:
        raise ConfigError(f"{ctx('mode')}mode must be centralized or decentralized") from None
    fallback = values.get("fallback_maneuver", "false").lower()
    if fallback not in _TRUE | _FALSE:
        raise ConfigError(f"{ctx('fallback_maneuver')}expected true or false, got {fallback!r}")
    try:
        alpha = AlphaFunction(values["kappa"]) if "kappa" in values else (base.alpha if base else AlphaFunction())
    except ValueError as exc:
        raise ConfigError(f"{ctx('kappa')}{exc}") from None

    cfg = ScenarioConfig(
        k=k,
        radius=get("radius", base.radius if base else 200.0),
        psi=math.radians(values["psi_deg"]) if "psi_deg" in values else (base.psi if base else 0.0),
        bounds=bounds,
        d_s=get("d_s", base.d_s if base else None),
        delta=get("delta", base.delta if base else 0.0),
        alpha=alpha,
        maneuver=maneuver,
        safety_kind=safety,
        dt=get("dt", base.dt if base else 0.02),
        t_end=get("t_end", base.t_end if base else 40.0),
        mode=mode,
        lam=get("lambda", 1.0),
        kp=get("kp", 1.0),
        fallback_maneuver=fallback in _TRUE,
        name=get("name", base.name if base else os.path.splitext(os.path.basename(source))[0]),
    )
    return cfg.validate()


def _maneuver(build, ctx):
    try:
        return build()
    except CbfError as exc:
        raise ConfigError(f"{ctx}{exc}") from None


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    values, where = parse_config_text(text, path)
    return config_from_mapping(values, where, path)


def summary_dict(cfg, summary):
    out = dataclasses.asdict(summary)
    out.update(
        dt=cfg.dt,
        t_end=cfg.t_end,
        kappa=cfg.alpha.kappa,
        psi_deg=math.degrees(cfg.psi),
        k=cfg.k,
        safety=cfg.safety_kind.value,
        maneuver=cfg.maneuver.kind.value,
    )
    return out


def _float_or_nan(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def cmd_run(args):
    from . import sim

    try:
        cfg = load_config(args.config) if args.config else preset(args.preset)
        cfg = cfg.with_overrides(
            mode=Mode(args.mode) if args.mode else None,
            dt=args.dt,
            t_end=args.t_end,
            alpha=AlphaFunction(args.kappa) if args.kappa is not None else None,
            psi=math.radians(args.psi) if args.psi is not None else None,
            fallback_maneuver=True if args.fallback_maneuver else None,
        )
        cfg.validate()
        build_circle_scenario(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CbfError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT

    records, summary = sim.run(cfg, threads=args.threads)
    os.makedirs(args.output, exist_ok=True)
    sim.write_trajectory_csv(records, os.path.join(args.output, "trajectory.csv"))
    sim.write_pairs_csv(records, os.path.join(args.output, "pairs.csv"))
    if args.figures:
        from .report import render_figures

        render_figures(records, cfg, args.output)
    out = {k: _float_or_nan(v) for k, v in summary_dict(cfg, summary).items()}
    print(json.dumps(out, indent=2))
    return EXIT_OK if summary.clean else EXIT_ABORT


def cmd_counterexample(args):
    from .verification import CEX_COEFF, counterexample_checks, counterexample_facts

    facts = counterexample_facts()
    items = counterexample_checks(facts)
    print("three-vehicle configuration, separately chosen maneuvers")
    print(f"  h = {[f'{h:.3e}' for h in facts['h']]}")
    with np.printoptions(precision=7, suppress=True):
        for n, (row, rhs) in enumerate(zip(facts["rows"], facts["rhs"]), 1):
            print(f"  row {n}: {row} . u >= {rhs:.3e}")
    print(f"  row coefficient magnitude {facts['coeff']:.9f} (quoted {CEX_COEFF}); positive scale {np.round(facts['scale'], 9).tolist()}")
    print(f"  QP infeasible: {facts['qp_infeasible']}; grid points satisfying both rows: {facts['grid_hits']} of {facts['grid_n'] ** 2} (u1), per-row 2-D grids")
    for label, v in facts["shared"].items():
        print(f"  shared {label}: h = {np.round(v['h'], 6).tolist()}, L_g h gamma = {[f'{r:.2e}' for r in v['rate']]}")
    for name, ok in items.items():
        print(f"  [{'ok' if ok else 'FAIL'}] {name}")
    # the +-0.4 rounding is reported but does not decide the exit code
    decisive = {k: v for k, v in items.items() if k != "rows match +-0.4"}
    return EXIT_OK if all(decisive.values()) else EXIT_ABORT


def cmd_verify(args):
    from .verification import run_all

    def progress(res):
        print(res.line(), flush=True)

    results = run_all(progress=progress, quick=args.quick)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_ABORT


def cmd_presets(args):
    for name in PRESETS:
        cfg = preset(name)
        print(f"{name}: k={cfg.k}, {cfg.maneuver.kind.value} maneuver, {cfg.safety_kind.value}, psi={math.degrees(cfg.psi):g} deg")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="cbfcompose", description="Barrier-function safety filters for unicycle teams.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a preset or config file and write CSV logs")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=None, metavar="NAME", help=f"one of: {', '.join(PRESETS)}")
    src.add_argument("--config", metavar="FILE", help="flat key = value scenario file")
    r.add_argument("--mode", choices=[m.value for m in Mode])
    r.add_argument("-o", "--output", default="out", help="output directory (created if absent)")
    r.add_argument("--dt", type=float)
    r.add_argument("--t-end", type=float)
    r.add_argument("--kappa", type=float, help="linear class-K gain")
    r.add_argument("--psi", type=float, help="heading offset [deg]")
    r.add_argument("--fallback-maneuver", action="store_true", help="fly the evading maneuver instead of halting on an infeasible QP")
    r.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    r.add_argument("--threads", type=int, help="worker threads for decentralized solves (default: CBF_THREADS or cores)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("counterexample", help="three-vehicle conflicting-maneuver demonstration")
    c.set_defaults(func=cmd_counterexample)

    v = sub.add_parser("verify", help="run the oracle and acceptance checks")
    v.add_argument("--quick", action="store_true", help="smaller samples, 2-vehicle presets only")
    v.set_defaults(func=cmd_verify)

    ls = sub.add_parser("presets", help="list compiled-in scenarios")
    ls.set_defaults(func=cmd_presets)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
