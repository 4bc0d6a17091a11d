"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical or calibration
failure. Messages go to stderr; datasets go to files under ``--out`` (the
``skr`` command also prints its breakdown to stdout).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .config import ConfigError, build_config, config_to_dict, load_config
from .drive import CalibrationError, calibrate_chip
from .harness import (
    ScenarioError,
    TraceMismatchError,
    bias_tradeoff_sweep,
    compare_designs,
    run_scenario,
    sweep_attenuation_curves,
    sweep_voltage_map,
)
from .io import OutputPathError, round_for_json, write_json, write_table
from .noise import InversionError, NoiseCalibrationError
from .photonics import OperatingRangeError, SaturationError
from .security import (
    ASYMPTOTIC,
    EstimationError,
    QKDParams,
    UnphysicalStateError,
    normalize_mode,
    secret_key_rate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "QKDVOA_SEED"

NUMERIC_ERRORS = (
    ArithmeticError,
    CalibrationError,
    NoiseCalibrationError,
    EstimationError,
    UnphysicalStateError,
    OperatingRangeError,
    SaturationError,
    InversionError,
    TraceMismatchError,
    ScenarioError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise ConfigError("voltage grid needs step > 0 and max >= min")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be >= 0")
    return seed


def _resolve_scenario(path, seed_flag, **overrides):
    """Seed precedence: --seed, then the config file, then QKDVOA_SEED, then 0."""
    if path is not None:
        loaded = load_config(path)
        values = dict(loaded.explicit)
    else:
        values = {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    if seed_flag is not None:
        values["seed"] = seed_flag
    elif "seed" not in values:
        env = _env_seed()
        if env is not None:
            values["seed"] = env
    return build_config(values, source=path)


def _require_out(args):
    if not args.out:
        raise ConfigError("--out is required for this command")
    return args.out


def cmd_curves(args):
    etas = args.eta_bias or [1.0, 0.75, 0.5, 0.25]
    for eb in etas:
        if not 0 < eb <= 1:
            raise ConfigError("eta-bias must be in (0,1]")
    if args.grid_size < 100:
        raise ConfigError("grid-size must be >= 100")
    out = _require_out(args)
    ds = sweep_attenuation_curves(etas, args.grid_size)
    cols = {"delta_phi_rad": ds.delta_phi}
    for eb in etas:
        cols[f"alpha_db_eta_{eb:g}"] = ds.alpha_db[eb]
    for eb in etas:
        cols[f"saturated_eta_{eb:g}"] = ds.saturated[eb]
    write_table(out, "curves", cols, args.format)
    return EXIT_OK


def cmd_chip_map(args):
    out = _require_out(args)
    chip = calibrate_chip()
    u1 = _grid(args.u1_min, args.u1_max, args.step)
    u2 = _grid(args.u2_min, args.u2_max, args.step)
    vm = sweep_voltage_map(chip, u1, u2)
    U1, U2 = np.meshgrid(vm.u1, vm.u2, indexing="ij")
    write_table(out, "voltage_map", {
        "u1_v": U1.ravel(), "u2_v": U2.ravel(), "alpha_db": vm.alpha_db.ravel(),
    }, args.format)
    write_json(out, "chip_map_summary.json", {
        "argmax": {"u1_v": vm.argmax[0], "u2_v": vm.argmax[1], "alpha_db": vm.argmax[2]},
        "calibration": chip.report,
    })
    return EXIT_OK


def _scenario_tables(rep):
    ps = {k: v for k, v in rep.per_second.items()}
    pb = dict(rep.per_block)
    block_cols = ["block"] + [k for k in pb if k != "block"]
    return ps, {k: pb[k] for k in block_cols}


def _report_doc(rep, loaded):
    return {
        "config": config_to_dict(rep.config),
        "defaults_used": loaded.defaults_used if loaded else [],
        "summary": rep.summary_dict(),
        "flags": rep.flags,
        "meta": rep.meta,
    }


def cmd_simulate(args):
    out = _require_out(args)
    loaded = _resolve_scenario(args.config, args.seed)
    rep = run_scenario(loaded.scenario)
    ps, pb = _scenario_tables(rep)
    write_table(out, "timeseries", ps, args.format)
    write_table(out, "blocks", pb, args.format)
    write_json(out, "summary.json", _report_doc(rep, loaded))
    return EXIT_OK


def cmd_compare(args):
    out = _require_out(args)
    loaded_a = _resolve_scenario(args.config, args.seed)
    if args.against:
        loaded_b = _resolve_scenario(args.against, loaded_a.scenario.seed)
    else:
        loaded_b = build_config({**loaded_a.explicit, "seed": loaded_a.scenario.seed, "voa_variant": "symmetric"})
    cfg_a = loaded_a.scenario
    cfg_b = replace(loaded_b.scenario, shared_trace_with=cfg_a.name or "a")
    cmp = compare_designs(cfg_a, cfg_b)
    for tag, rep in (("a", cmp.a), ("b", cmp.b)):
        ps, pb = _scenario_tables(rep)
        write_table(out, f"timeseries_{tag}", ps, args.format)
        write_table(out, f"blocks_{tag}", pb, args.format)
    write_json(out, "summary.json", {
        "a": _report_doc(cmp.a, loaded_a),
        "b": _report_doc(cmp.b, loaded_b),
        "ratios_b_over_a": cmp.ratios,
    })
    return EXIT_OK


def cmd_skr(args):
    if args.config:
        loaded = _resolve_scenario(args.config, None, distance_km=args.distance_km)
        q = loaded.scenario.qkd
    else:
        q = QKDParams(distance_km=args.distance_km if args.distance_km is not None else 30.0)
    changes = {
        k: v for k, v in (
            ("modulation_variance_snu", args.va),
            ("excess_noise_snu", args.excess_noise),
        ) if v is not None
    }
    if changes:
        q = replace(q, **changes)
    mode = normalize_mode(args.mode)
    if mode != ASYMPTOTIC and q.pe_fraction <= 0:
        raise ConfigError("pe_fraction must be > 0 in finite-size mode")
    br = secret_key_rate(q, mode)
    doc = {"params": asdict(q) | {"transmittance_used": q.T}, "breakdown": br.to_dict()}
    print(json.dumps(round_for_json(doc), indent=2))
    if args.out:
        write_json(args.out, "skr.json", doc)
    return EXIT_OK


def cmd_tradeoff(args):
    out = _require_out(args)
    etas = args.eta_bias or [round(0.05 * k, 2) for k in range(1, 21)]
    for eb in etas:
        if not 0 < eb <= 1:
            raise ConfigError("eta-bias must be in (0,1]")
    rows = bias_tradeoff_sweep(etas, args.alpha_target_db, args.delta_max_pi * math.pi)
    cols = {k: np.array([getattr(r, k) for r in rows]) for k in asdict(rows[0])}
    write_table(out, "tradeoff", cols, args.format)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="qkdvoa", description="Biased-MZI VOA and CV-QKD key-rate simulator.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="scenario config (key = value, or summary.json)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help=f"seed (overrides config and ${SEED_ENV})")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("curves", help="attenuation versus phase difference")
    common(sp, config=False)
    sp.add_argument("--eta-bias", type=_float_list, action="extend")
    sp.add_argument("--grid-size", type=int, default=1001)
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("chip-map", help="total attenuation over the drive-voltage grid")
    common(sp, config=False)
    sp.add_argument("--u1-min", type=float, default=0.0)
    sp.add_argument("--u1-max", type=float, default=12.0)
    sp.add_argument("--u2-min", type=float, default=0.0)
    sp.add_argument("--u2-max", type=float, default=12.0)
    sp.add_argument("--step", type=float, default=0.1)
    sp.set_defaults(func=cmd_chip_map)

    sp = sub.add_parser("simulate", help="free-running stability scenario")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="two designs on one noise trace")
    common(sp)
    sp.add_argument("--against", help="second scenario config (default: symmetric variant of --config)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("skr", help="secret key rate breakdown as JSON")
    common(sp)
    sp.add_argument("--distance-km", type=float)
    sp.add_argument("--mode", default=ASYMPTOTIC)
    sp.add_argument("--va", type=float, help="modulation variance (SNU)")
    sp.add_argument("--excess-noise", type=float, help="excess noise (SNU)")
    sp.set_defaults(func=cmd_skr)

    sp = sub.add_parser("tradeoff", help="range versus stability per bias coefficient")
    common(sp, config=False)
    sp.add_argument("--eta-bias", type=_float_list, action="extend")
    sp.add_argument("--alpha-target-db", type=float, default=38.0)
    sp.add_argument("--delta-max-pi", type=float, default=0.016, help="phase excursion in units of pi")
    sp.set_defaults(func=cmd_tradeoff)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError, OutputPathError) as exc:
        print(f"qkdvoa: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"qkdvoa: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining ValueErrors come from parameter validation
        print(f"qkdvoa: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
