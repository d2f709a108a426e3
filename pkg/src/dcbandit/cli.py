"""``dcbandit`` command line: run experiments, fetch the mushroom data, replot.

Exit codes: 0 success, 2 bad spec or arguments, 3 dataset missing or
invalid, 4 training diverged.
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
import tempfile
import time
import urllib.request
from pathlib import Path

from .config import SpecError, apply_overrides, bundled_specs, load_spec
from .envs import (
    MUSHROOM_BYTES, MUSHROOM_FILENAME, MUSHROOM_ROWS, DatasetError, default_data_dir,
    load_mushroom_dataset,
)
from .nn import NumericalError
from .report import emit_csv, emit_summary_csv, emit_svg, parse_traces_csv
from .sim import aggregate_by_agent, aggregate_runs, run_many

log = logging.getLogger("dcbandit")

EXIT_OK, EXIT_SPEC, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
UCI_URL = ("https://archive.ics.uci.edu/ml/machine-learning-databases/mushroom/"
           + MUSHROOM_FILENAME)


def _fail(code, message):
    print(f"dcbandit: error: {message}", file=sys.stderr)
    return code


def _seed_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_run(args):
    try:
        spec = apply_overrides(
            load_spec(args.spec), horizon=args.horizon, seeds=args.seeds, output=args.out,
            regret_mode=args.regret_mode, retrain_mode=args.retrain_mode,
            workers=args.workers, dataset=args.dataset,
        )
    except SpecError as exc:
        return _fail(EXIT_SPEC, str(exc))
    if spec.env.task == "mushroom":
        path = spec.env.dataset_path()
        if not path.is_file():
            return _fail(EXIT_DATA, f"mushroom dataset not found at {path} "
                                    "(run `dcbandit fetch-data` or set BANDIT_DATA_DIR)")
    out = Path(spec.output)
    log.info("%s: %d agent(s) x %d seed(s), horizon %d", spec.name, len(spec.agents),
             len(spec.seeds), spec.horizon)
    started = time.perf_counter()
    try:
        traces = run_many(spec.run_configs(), workers=spec.workers)
    except NumericalError as exc:
        return _fail(EXIT_DIVERGED, f"training diverged: {exc}")
    except DatasetError as exc:
        return _fail(EXIT_DATA, f"mushroom dataset unusable: {exc}")
    curves = list(aggregate_by_agent(traces).values())
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "traces.csv").write_text(emit_csv(traces))
        (out / "summary.csv").write_text(emit_summary_csv(curves))
        (out / "regret.svg").write_text(emit_svg(curves, title=f"{spec.name}: cumulative regret"))
    except OSError as exc:
        return _fail(EXIT_SPEC, f"cannot write results to {out}: {exc}")
    log.info("finished in %.1fs", time.perf_counter() - started)
    for c in curves:
        print(f"{c.agent:24s} FCR mean {c.fcr_mean:10.2f}  (min {c.fcr_min:.2f}, "
              f"max {c.fcr_max:.2f}, {len(c.fcrs)} run(s))")
    print(f"wrote {out / 'traces.csv'}, {out / 'summary.csv'}, {out / 'regret.svg'}")
    return EXIT_OK


def verify_mushroom_file(path):
    """Check byte size and record count of a candidate UCI file."""
    size = path.stat().st_size
    if size != MUSHROOM_BYTES:
        raise DatasetError(f"{path} is {size} bytes, expected {MUSHROOM_BYTES}")
    data = load_mushroom_dataset(path)
    if data.rows != MUSHROOM_ROWS:
        raise DatasetError(f"{path} has {data.rows} records, expected {MUSHROOM_ROWS}")
    return data


def cmd_fetch_data(args):
    dest_dir = Path(args.dest) if args.dest else default_data_dir()
    dest = dest_dir / MUSHROOM_FILENAME
    if dest.is_file() and not args.force:
        try:
            data = verify_mushroom_file(dest)
        except DatasetError as exc:
            return _fail(EXIT_DATA, f"cached file is invalid ({exc}); rerun with --force")
        print(f"{dest}: ok ({data.rows} records, {int(data.edible.sum())} edible)")
        return EXIT_OK
    with tempfile.TemporaryDirectory() as tmp:
        candidate = Path(tmp) / MUSHROOM_FILENAME
        try:
            if args.source:
                shutil.copyfile(args.source, candidate)
            else:
                log.info("downloading %s", args.url)
                with urllib.request.urlopen(args.url, timeout=60) as resp:
                    candidate.write_bytes(resp.read())
        except OSError as exc:
            return _fail(EXIT_DATA, f"could not obtain the dataset: {exc}")
        try:
            data = verify_mushroom_file(candidate)
        except DatasetError as exc:
            return _fail(EXIT_DATA, f"downloaded file rejected: {exc}")
        dest_dir.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(candidate, dest)
    print(f"{dest}: ok ({data.rows} records, {int(data.edible.sum())} edible)")
    return EXIT_OK


def cmd_replay(args):
    src = Path(args.traces)
    try:
        traces, _ = parse_traces_csv(src.read_text())
    except (OSError, ValueError) as exc:
        return _fail(EXIT_SPEC, f"cannot read {src}: {exc}")
    groups = {}
    for t in traces:
        groups.setdefault(t.agent, []).append(t)
    try:
        curves = [aggregate_runs(ts, name) for name, ts in groups.items()]
    except ValueError as exc:
        return _fail(EXIT_SPEC, str(exc))
    out = Path(args.out) if args.out else src.with_name("regret.svg")
    out.write_text(emit_svg(curves, title=args.title))
    print(f"wrote {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dcbandit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment spec")
    run.add_argument("--spec", required=True,
                     help=f"TOML spec path or bundled name ({', '.join(bundled_specs())})")
    run.add_argument("--horizon", type=int)
    run.add_argument("--seeds", type=_seed_list, help="comma-separated integers")
    run.add_argument("--out", help="output directory")
    run.add_argument("--regret-mode", choices=("expected", "realized"))
    run.add_argument("--retrain-mode", choices=("warm", "scratch"))
    run.add_argument("--workers", type=int, help="parallel processes")
    run.add_argument("--dataset", help="path to agaricus-lepiota.data")
    run.set_defaults(func=cmd_run)

    fetch = sub.add_parser("fetch-data", help="download and verify the UCI mushroom file")
    fetch.add_argument("--url", default=UCI_URL)
    fetch.add_argument("--from", dest="source", help="import a local copy instead of downloading")
    fetch.add_argument("--dest", help="target directory (default: $BANDIT_DATA_DIR)")
    fetch.add_argument("--force", action="store_true")
    fetch.set_defaults(func=cmd_fetch_data)

    replay = sub.add_parser("replay", help="re-render regret.svg from traces.csv")
    replay.add_argument("traces")
    replay.add_argument("--out")
    replay.add_argument("--title", default="Cumulative regret")
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
