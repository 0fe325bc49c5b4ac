"""Command-line surface: forward, invert, inclusion, timelapse, ledger-dump.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 io error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as cfgmod
from .errors import (
    AssemblyError,
    ConfigError,
    FactorizationError,
    FormatError,
    GeometryError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _apply_cli_overrides(cfg: dict, args) -> dict:
    if args.out is not None:
        cfg["output_dir"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    return cfg


def _cmd_forward(args) -> int:
    from .acquisition import synthesize_data
    from .fileio import write_data_file
    from .linsolve import SolveLedger

    cfg = cfgmod.merge_config(cfgmod.default_forward_config(),
                              _apply_cli_overrides(_load_config(args.config), args))
    cfgmod.validate_config(cfg)
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    grid = cfgmod.grid_from_config(cfg)
    model = cfgmod.resolve_model(cfg["model"], grid)
    acq = cfgmod.acquisition_from_config(cfg)
    freqs = sorted({f for e in cfg["schedule"] for f in e["freqs_hz"]})
    ledger = SolveLedger()
    dataset = synthesize_data(
        model, acq, freqs, cfg["pml_width"], noise_snr_db=cfg.get("noise_snr_db"),
        seed=cfg["seed"], ledger=ledger, threads=cfg.get("threads", 1),
    )
    write_data_file(dataset, os.path.join(out_dir, "data.lwid"))
    ledger.to_csv(os.path.join(out_dir, "ledger.csv"))
    cfgmod.write_resolved_config(cfg, os.path.join(out_dir, "resolved_config.json"))
    print(f"wrote {os.path.join(out_dir, 'data.lwid')} "
          f"({dataset.n_sources} sources, {dataset.n_receivers} receivers, "
          f"{len(dataset.frequencies)} frequencies)")
    return EXIT_OK


def _cmd_invert(args) -> int:
    from .fileio import ModelFile, read_data_file, write_model_file
    from .grid import build_partition
    from .inversion import (
        irwri_frequency_batch,
        multiblock_frequency_batch,
        reports_to_csv,
        run_frequency_schedule,
    )
    from .linsolve import SolveLedger
    from .localized import lwi_multi_frequency

    cfg = cfgmod.merge_config(cfgmod.default_invert_config(),
                              _apply_cli_overrides(_load_config(args.config), args))
    cfgmod.validate_config(cfg)
    if "data_path" not in cfg:
        raise ConfigError("invert requires 'data_path' in the config")
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    dataset = read_data_file(cfg["data_path"])
    grid = cfgmod.grid_from_config(cfg)
    model = cfgmod.resolve_model(cfg["model"], grid)
    inv_cfg = cfgmod.inversion_config_from(cfg)
    algorithm = cfg.get("flags", {}).get("algorithm", "irwri")
    ledger = SolveLedger()

    if algorithm == "irwri":
        final, reports = run_frequency_schedule(
            irwri_frequency_batch, model, dataset, inv_cfg, ledger=ledger)
    else:
        partition = build_partition(grid, cfgmod.rectangles_from_config(cfg))
        if algorithm == "lwi":
            final, reports = lwi_multi_frequency(model, dataset, partition,
                                                 inv_cfg, ledger=ledger)
        else:

            def batch(m, ds, f, c, *, ledger=None, n_iter=None):
                return multiblock_frequency_batch(m, ds, f, partition, c,
                                                  ledger=ledger, n_iter=n_iter)

            final, reports = run_frequency_schedule(batch, model, dataset,
                                                    inv_cfg, ledger=ledger)

    write_model_file(ModelFile.from_model(final), os.path.join(out_dir, "model_final.lwim"))
    reports_to_csv(reports, os.path.join(out_dir, "reports.csv"))
    ledger.to_csv(os.path.join(out_dir, "ledger.csv"))
    cfgmod.write_resolved_config(cfg, os.path.join(out_dir, "resolved_config.json"))
    print(f"wrote {os.path.join(out_dir, 'model_final.lwim')} "
          f"({algorithm}, {sum(1 for r in reports if r.phase == 'iterate')} iterations)")
    return EXIT_OK


def _cmd_inclusion(args) -> int:
    from .experiments import run_inclusion_experiment

    cfg = _apply_cli_overrides(_load_config(args.config), args)
    summary = run_inclusion_experiment(cfg, out_dir=args.out)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_timelapse(args) -> int:
    from .experiments import run_timelapse_experiment

    cfg = _apply_cli_overrides(_load_config(args.config), args)
    summary = run_timelapse_experiment(cfg, out_dir=args.out)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_ledger_dump(args) -> int:
    path = args.path
    if os.path.isdir(path):
        path = os.path.join(path, "ledger.csv")
    with open(path) as fh:
        text = fh.read()
    sys.stdout.write(text)
    totals = {}
    for line in text.splitlines()[1:]:
        phase, freq, size_class, count = line.split(",")
        totals[size_class] = totals.get(size_class, 0) + int(count)
    for size_class in sorted(totals):
        print(f"total {size_class}: {totals[size_class]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tofwi",
        description="Frequency-domain acoustic FWI with target-localized updates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="rng seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")

    p = sub.add_parser("forward", help="synthesize observed records")
    common(p)
    p.set_defaults(func=_cmd_forward)
    p = sub.add_parser("invert", help="invert a data file (algorithm from config)")
    common(p)
    p.set_defaults(func=_cmd_invert)
    p = sub.add_parser("inclusion", help="run the inclusion extraction experiment")
    common(p)
    p.set_defaults(func=_cmd_inclusion)
    p = sub.add_parser("timelapse", help="run the desk-scale time-lapse workflow")
    common(p)
    p.set_defaults(func=_cmd_timelapse)
    p = sub.add_parser("ledger-dump", help="print a stored solve ledger with totals")
    p.add_argument("path", help="ledger.csv file or a run directory")
    p.set_defaults(func=_cmd_ledger_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GeometryError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FactorizationError, AssemblyError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
