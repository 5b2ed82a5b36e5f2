"""Command-line front end.

Every run writes into its output directory: ``config.json`` (the resolved
configuration), ``manifest.json`` (schema tag, seed, wall clock, files),
the numeric tables as CSV and a ``summary.json``. Everything except the
manifest is a pure function of (config, seed).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import _kernels
from . import experiments as ex
from .config import SCHEMA_TAG, ExperimentConfig
from .engine import set_fft_workers
from .optics import save_cfd
from .unitaries import to_json as unitary_to_json

RUN_SCHEMA = "mplcq-run/1"
EXIT_USAGE = 2
EXIT_FAILURE = 1


class UsageError(Exception):
    pass


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


class Run:
    def __init__(self, out, cfg, command, args):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.command = command
        self.args = args
        self.files = []
        self.t0 = time.time()
        self.write_text("config.json", cfg.to_json())

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def write_text(self, name, text):
        self.path(name).write_text(text)

    def finish(self, summary):
        write_json(self.path("summary.json"), summary)
        manifest = {
            "schema": RUN_SCHEMA,
            "config_schema": SCHEMA_TAG,
            "command": self.command,
            "seed": self.cfg.seed,
            "matrix_level": bool(getattr(self.args, "matrix_level", False)),
            "threads": getattr(self.args, "threads", 1),
            "version": __version__,
            "kernel_backend": _kernels.backend(),
            "started_unix": self.t0,
            "wall_clock_s": time.time() - self.t0,
            "files": sorted(set(self.files)),
        }
        write_json(self.out / "manifest.json", manifest)
        return summary


# --- commands -------------------------------------------------------------------


def cmd_design(cfg, args, run):
    U = ex.task_target(cfg, args.task)
    stack, report, _ = ex.design_unitary(cfg, U)
    stack.save(run.path("design.mplc"))
    run.write_text("design_report.json", report.to_json())
    run.write_text("target.json", unitary_to_json(U) + "\n")
    write_csv(run.path("fidelity_trace.csv"), ["iteration", "mean_mode_fidelity"], enumerate(report.fidelity_trace, 1))
    return {
        "task": args.task or cfg.experiment.task,
        "modes": U.shape[0],
        "mean_mode_fidelity": float(np.mean(report.mode_fidelities)),
        "min_mode_fidelity": float(np.min(report.mode_fidelities)),
        "statistical_fidelity": report.statistical_fidelity,
        "efficiency": report.efficiency,
    }


def _load_table_matrix(path, d):
    from .twophoton import CoincidenceTable

    t = CoincidenceTable.load(path)
    if t.shape is None:
        if len(t.pairs) != d * d:
            raise UsageError(f"{path}: expected {d * d} cross-block entries")
        t.shape = (d, d)
    return t


def cmd_certify(cfg, args, run):
    from .certification import certify

    d = cfg.experiment.d
    if args.tables:
        P_std = _load_table_matrix(args.tables[0], d)
        P_mub = _load_table_matrix(args.tables[1], d)
        res = certify(P_std, P_mub, d, cfg.experiment.conjugated_mub)
        res.digest["source"] = [str(p) for p in args.tables]
    else:
        out = ex.run_certification(cfg, d, args.matrix_level)
        res, P_std, P_mub = out["result"], out["P_std"], out["P_mub"]
        for name, (stack, report) in out["reports"].items():
            stack.save(run.path(f"{name}.mplc"))
            run.write_text(f"{name}_design_report.json", report.to_json())
    P_std.save(run.path("coincidences_standard.csv"))
    P_mub.save(run.path("coincidences_mub.csv"))
    run.write_text("certification.json", res.to_json())
    return asdict(res)


def cmd_phase_scan(cfg, args, run):
    scan = ex.run_phase_scan(cfg, cfg.experiment.d, args.matrix_level)
    d = scan.d
    if d == 2:
        rows = [(p, *r) for p, r in zip(scan.phases, scan.rates)]
        write_csv(run.path("fringe.csv"), ["phi"] + [f"P_A0_B{k}" for k in range(d)], rows)
    else:
        rows = []
        for i, p1 in enumerate(scan.phases):
            for j, p2 in enumerate(scan.phases):
                rows.append((p1, p2, *scan.rates[i, j]))
        write_csv(run.path("fringe.csv"), ["phi1", "phi2"] + [f"P_A0_B{k}" for k in range(d)], rows)
    write_csv(run.path("visibility.csv"), ["pair", "visibility"], [(f"A0-B{k}", v) for k, v in enumerate(scan.visibilities)])
    return {"d": d, "visibilities": scan.visibilities.tolist(), "mean_visibility": scan.mean_visibility}


def _haar_tables(run, items, prefix=""):
    write_csv(
        run.path(f"{prefix}haar_fidelities.csv"),
        ["index", "statistical_fidelity", "efficiency", "single_photon_fidelity"],
        [(it.index, it.fidelity, it.efficiency, it.single_photon_fidelity) for it in items],
    )
    write_csv(
        run.path(f"{prefix}normalized_rates.csv"),
        ["index", "pair", "rate_over_mean", "ideal_rate_over_mean"],
        [(it.index, k, r, q) for it in items for k, (r, q) in enumerate(zip(it.rates, it.ideal_rates))],
    )


def cmd_haar_bench(cfg, args, run):
    items = ex.run_haar_batch(cfg, args.count, args.planes, args.matrix_level, args.threads)
    _haar_tables(run, items)
    s = ex.summarize_haar(items, cfg.experiment.pt_threshold)
    s["planes"] = args.planes or cfg.geometry.plane_count
    return s


def cmd_planes_sweep(cfg, args, run):
    planes = [int(p) for p in args.planes_list.split(",")] if args.planes_list else None
    rows = ex.run_planes_sweep(cfg, planes, args.samples, args.matrix_level, args.threads)
    write_csv(run.path("planes_sweep.csv"), ["planes", "mean_statistical_fidelity", "std", "samples"], rows)
    return {"rows": [dict(zip(("planes", "mean", "std", "samples"), r)) for r in rows]}


def cmd_mode_convert(cfg, args, run):
    res = ex.run_mode_conversion(cfg, args.matrix_level)
    if res["stack"] is not None:
        res["stack"].save(run.path("conversion.mplc"))
        run.write_text("conversion_design_report.json", res["report"].to_json())
    for name, fld in res["fields"].items():
        save_cfd(run.path(f"conditional_B_given_{name}.cfd"), fld)
    rows = [(a, lab, frac) for a, d in res["conditional"].items() for lab, frac in d.items()]
    write_csv(run.path("conditional_fractions.csv"), ["alice_spot", "bob_mode", "fraction"], rows)
    return {k: res[k] for k in ("overlap_fidelities", "conditional", "crosstalk")}


def cmd_efficiency(cfg, args, run):
    items = ex.run_haar_batch(cfg, args.count, args.planes, args.matrix_level, args.threads)
    write_csv(run.path("efficiency.csv"), ["index", "efficiency"], [(it.index, it.efficiency) for it in items])
    eta = np.array([it.efficiency for it in items])
    return {
        "count": len(items),
        "mean_efficiency": float(eta.mean()),
        "std_efficiency": float(eta.std(ddof=1)) if len(eta) > 1 else 0.0,
        "min_efficiency": float(eta.min()),
        "max_efficiency": float(eta.max()),
    }


COMMANDS = {
    "design": cmd_design,
    "certify": cmd_certify,
    "phase-scan": cmd_phase_scan,
    "haar-bench": cmd_haar_bench,
    "planes-sweep": cmd_planes_sweep,
    "mode-convert": cmd_mode_convert,
    "efficiency": cmd_efficiency,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config (see `mplcq schema`)")
    common.add_argument("--seed", type=int, help="override the config seed (u64)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--matrix-level", action="store_true", help="use exact target matrices instead of optics")
    common.add_argument("--threads", type=int, default=1, help="worker processes for batch items")

    p = argparse.ArgumentParser(prog="mplcq", description="MPLC design and two-photon experiment runner")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("design", parents=[common], help="design a mask stack")
    s.add_argument("--task", choices=["identity", "dft", "haar"])
    s.add_argument("--d", type=int)
    s = sub.add_parser("certify", parents=[common], help="entanglement certification")
    s.add_argument("--d", type=int)
    s.add_argument("--tables", nargs=2, type=Path, metavar=("STD", "MUB"), help="certify measured coincidence tables")
    s = sub.add_parser("phase-scan", parents=[common], help="MUB interference phase scan")
    s.add_argument("--d", type=int)
    s.add_argument("--samples", type=int, help="phase samples per axis")
    helps = {"haar-bench": "Haar-random two-photon benchmark", "efficiency": "transformation efficiency of Haar designs"}
    for name in ("haar-bench", "efficiency"):
        s = sub.add_parser(name, parents=[common], help=helps[name])
        s.add_argument("--count", type=int)
        s.add_argument("--planes", type=int)
    s = sub.add_parser("planes-sweep", parents=[common], help="statistical fidelity vs plane count")
    s.add_argument("--planes-list", help="comma-separated plane counts")
    s.add_argument("--samples", type=int)
    sub.add_parser("mode-convert", parents=[common], help="pixel to LP-mode conversion")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def resolve_config(args):
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if getattr(args, "d", None):
        cfg.experiment.d = args.d
    if getattr(args, "samples", None) and args.command == "phase-scan":
        cfg.experiment.scan_samples = args.samples
    if args.out is not None:
        cfg.output_dir = str(args.out)
    if cfg.output_dir is None:
        cfg.output_dir = f"runs/{args.command}-seed{cfg.seed}"
    cfg.validate()
    return cfg


def _error(kind, msg, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(msg)}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "schema":
        from .config import CONFIG_SCHEMA

        print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
        return 0
    try:
        cfg = resolve_config(args)
    except Exception as exc:  # jsonschema, ValueError, file errors
        return _error("usage", exc, EXIT_USAGE)
    set_fft_workers(args.threads)
    run = Run(cfg.output_dir, cfg, args.command, args)
    try:
        summary = COMMANDS[args.command](cfg, args, run)
    except UsageError as exc:
        return _error("usage", exc, EXIT_USAGE)
    except Exception as exc:
        return _error(type(exc).__name__, exc, EXIT_FAILURE)
    run.finish(summary)
    print(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
