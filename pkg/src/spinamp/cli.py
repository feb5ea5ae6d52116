"""Command-line front end.

    spinamp run CONFIG [--out DIR] [--workers K] [--tol-rel X --tol-abs Y]
    spinamp fit CSV --model {sqrtN,logN-over-N,logsqrtN-over-sqrtN} [--x N] [--y COL]

Exit status: 0 on success, 2 if some grid points failed, 1 on invalid input.
``SPINAMP_WORKERS`` sets the default worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .fitting import MODELS, fit_scaling
from .runner import ConfigError, load_config, run_experiment

_DEFAULT_Y = {"sqrtN": "G_max", "logN-over-N": "t_max", "logsqrtN-over-sqrtN": "t_max"}


def _parser():
    ap = argparse.ArgumentParser(prog="spinamp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--workers", type=int, help="parallel workers (default $SPINAMP_WORKERS or 1)")
    r.add_argument("--tol-rel", type=float, help="relative solver tolerance")
    r.add_argument("--tol-abs", type=float, help="absolute solver tolerance")
    f = sub.add_parser("fit", help="fit a scaling law to a results CSV")
    f.add_argument("csv")
    f.add_argument("--model", required=True, choices=sorted(MODELS))
    f.add_argument("--x", default="N", help="column holding N")
    f.add_argument("--y", help="column to fit (default depends on model)")
    f.add_argument("--min-n", type=float, default=0.0, help="drop rows with N below this")
    return ap


def _cmd_run(a) -> int:
    try:
        cfg = load_config(a.config)
        if a.tol_rel is not None or a.tol_abs is not None:
            cfg = cfg.with_tolerances(a.tol_rel, a.tol_abs)
        summary = run_experiment(cfg, workers=a.workers, out_dir=a.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 2 if summary["n_failed"] else 0


def _cmd_fit(a) -> int:
    ycol = a.y or _DEFAULT_Y[a.model]
    try:
        with open(a.csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows = [r for r in rows if not r.get("error") and r.get(ycol, "") != ""]
        N = [float(r[a.x]) for r in rows]
        y = [float(r[ycol]) for r in rows]
        keep = [(n, v) for n, v in zip(N, y) if n >= a.min_n]
        res = fit_scaling([k[0] for k in keep], [k[1] for k in keep], a.model)
    except (OSError, KeyError, ValueError) as e:
        print(f"fit error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(res.to_dict(), sort_keys=True))
    return 0


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    return {"run": _cmd_run, "fit": _cmd_fit}[a.cmd](a)


if __name__ == "__main__":
    sys.exit(main())
