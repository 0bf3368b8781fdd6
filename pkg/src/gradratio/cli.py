"""Batch command line interface.

    gradratio <experiment> [--config FILE] [--set key=value ...] [--seed N] --out DIR

Writes ``results.csv``, one ``trace_<id>.json`` per solver run and
``manifest.json`` into DIR. Files are first written to a scratch directory
next to DIR and moved in only after the whole run succeeded, so a failed run
leaves no partial output. ``--config`` also accepts a ``manifest.json`` from
an earlier run, which replays that run. The worker count is read from the
``GRADRATIO_WORKERS`` environment variable.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .experiments import KINDS, WORKERS_ENV, ExperimentConfig, parse_config_text, run_experiment

log = logging.getLogger("gradratio")

TIMING_COLUMNS = ("seconds",)


def _format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def results_csv(result):
    """Render an ExperimentResult as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_format_cell(row[c]) for c in result.columns])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dumps(obj):
    # json writes inf as Infinity, which is accepted back by json.loads
    return json.dumps(obj, indent=1, sort_keys=True, default=_json_default)


def _safe_id(trace_id):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in trace_id)


def load_overrides(config_path, kind):
    """Key/value overrides from a flat config file or an earlier manifest."""
    if config_path is None:
        return {}
    path = Path(config_path)
    text = path.read_text()
    if path.suffix == ".json":
        manifest = json.loads(text)
        if manifest.get("kind") != kind:
            raise ValueError(f"manifest is for {manifest.get('kind')!r}, not {kind!r}")
        return dict(manifest["config"]["values"])
    return parse_config_text(text)


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_outputs(out_dir, result, manifest):
    """Write all outputs to a scratch directory, then move them into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".gradratio-", dir=out_dir.parent))
    try:
        names = ["results.csv"]
        (scratch / "results.csv").write_text(results_csv(result))
        for trace_id, trace in result.traces.items():
            name = f"trace_{_safe_id(trace_id)}.json"
            names.append(name)
            (scratch / name).write_text(_dumps(trace))
        manifest = dict(manifest, files=sorted(names + ["manifest.json"]))
        (scratch / "manifest.json").write_text(_dumps(manifest))
        out_dir.mkdir(exist_ok=True)
        for name in names + ["manifest.json"]:
            os.replace(scratch / name, out_dir / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gradratio",
        description="Run L1/L2-on-the-gradient recovery experiments.",
        epilog=f"The {WORKERS_ENV} environment variable sets the number of worker processes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="experiment")
    helps = {
        "onebar": "exact-recovery sweep over one-bar signals",
        "twobar": "exact-recovery sweep over two-bar contrast",
        "superres": "image recovery from low-frequency measurements",
        "mri": "reconstruction from radial k-space lines",
        "ct": "limited-angle tomography",
        "sensitivity": "relative error over the (rho, beta, lambda) grid",
        "ablation": "box-constraint and inner-iteration studies",
    }
    for kind in KINDS:
        p = sub.add_parser(kind, help=helps[kind])
        p.add_argument("--config", help="flat key = value file, or a manifest.json to replay")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                       help="override one config key (repeatable)")
        p.add_argument("--seed", type=int, help="shorthand for --set seed=N")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = load_overrides(args.config, args.kind)
        values.update(_parse_set(args.set))
        if args.seed is not None:
            values["seed"] = args.seed
        config = ExperimentConfig(args.kind, values)
        result = run_experiment(config)
        manifest = {
            "tool": "gradratio",
            "version": __version__,
            "kind": args.kind,
            "config": config.to_dict(),
            "columns": result.columns,
            "rows": len(result.rows),
            "timing_columns": [c for c in TIMING_COLUMNS if c in result.columns],
            "workers_env": WORKERS_ENV,
            "environment": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
        }
        write_outputs(args.out, result, manifest)
    except (ValueError, TypeError, OSError, RuntimeError, KeyError) as exc:
        print(f"gradratio: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(result.rows)} rows to {Path(args.out) / 'results.csv'}")
    return 0
