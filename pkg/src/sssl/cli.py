"""Command line interface: ``sssl fit | calibrate | simulate | benchmark | rolling | metrics``.

Exit codes are 0 on success, 2 for usage or input errors and 3 when a
sampler aborts on a numerical failure (a state dump is written first).

Seeds: every command takes one root seed (``--seed``, else the ``SSSL_SEED``
environment variable, else fresh entropy). Stream ``k`` of a command uses
``numpy.random.SeedSequence(root, spawn_key=(k,))``; chains, grid points and
windows are numbered in the order they are listed, so any single piece can
be rerun on its own from the echoed seed and index.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import os
import secrets
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .analysis import inefficiency_summary, median_probability_graph, structure_metrics
from .calibration import interpolate_crossing, prior_curve
from .chain import ChainConfig, validate_inputs
from .data import (
    RawTable,
    SparseTruth,
    identity_truth,
    load_csv,
    load_matrix,
    paper_p12_covariance,
    rolling_windows,
    sample_gaussian,
    standardize,
    tridiagonal_truth,
    write_csv,
)
from .errors import SamplerAbort, SSSLError
from .model import CONCENTRATION, COVARIANCE, MODES, Dataset, EdgeIndicators, Hyperparams
from .samplers import run_sampler

log = logging.getLogger("sssl")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ABORT = 3
SEED_ENV = "SSSL_SEED"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return secrets.randbits(63)


def stream(root: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=(index,)))


def resolve_theta(args, p: int) -> Hyperparams:
    if args.pi == "auto":
        if p < 4:
            raise UsageError(f"--pi auto means 2/(p-1), which is not below 1 for p={p}; pass --pi explicitly")
        pi = 2.0 / (p - 1)
    else:
        pi = args.pi
    return Hyperparams(v0=args.v0, h=args.h, pi=pi, lam=args.lam)


def chain_config(args, seed: int) -> ChainConfig:
    return ChainConfig(
        iterations=args.iterations,
        burnin=args.burnin,
        seed=seed,
        refresh_interval=args.refresh_interval,
        trace_subset=args.trace_subset,
        random_scan=args.random_scan,
    )


def envelope(command: str, seed: int, **body) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "software_version": __version__,
        "command": command,
        "seed": seed,
        **body,
    }


def write_json(obj, path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False)
    if path is None or str(path) == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _pi_value(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--pi takes a number or 'auto', got {text!r}") from None


def _add_prior_flags(ap, multi=False):
    kind = _float_list if multi else float
    ap.add_argument("--v0", type=kind, default=[0.02] if multi else 0.02, help="spike standard deviation")
    ap.add_argument("--h", type=kind, default=[50.0] if multi else 50.0, help="slab to spike sd ratio")
    ap.add_argument("--lam", "--lambda", dest="lam", type=float, default=1.0, help="diagonal exponential rate")


def _add_chain_flags(ap):
    ap.add_argument("--model", choices=MODES, default=COVARIANCE)
    _add_prior_flags(ap)
    ap.add_argument("--pi", type=_pi_value, default="auto", help="prior edge probability or 'auto' for 2/(p-1)")
    ap.add_argument("--iterations", type=int, default=10000)
    ap.add_argument("--burnin", type=int, default=3000)
    ap.add_argument("--refresh-interval", type=int, default=100)
    ap.add_argument("--trace-subset", type=int, default=100)
    ap.add_argument("--random-scan", action="store_true")
    ap.add_argument("--seed", type=int, default=None)


def _load_dataset(args) -> Dataset:
    raw = load_csv(args.input, has_header=args.header or args.time_column is not None,
                   time_column=args.time_column)
    return standardize(raw)


# ---------------------------------------------------------------- fit


def fit_result(data: Dataset, theta: Hyperparams, config: ChainConfig, mode: str, rng) -> dict:
    """Run one chain and build the JSON body shared by ``fit`` and ``rolling``."""
    out = run_sampler(data, theta, config, rng, mode)
    graph = median_probability_graph(out)
    secs = out.sweep_seconds
    return {
        "model": mode,
        "p": data.p,
        "n": data.n,
        "labels": data.labels,
        "theta": theta.as_dict(),
        "config": config.as_dict(),
        "edge_prob": out.edge_freq.tolist(),
        "median_graph": graph.adjacency.astype(int).tolist(),
        "edge_count": graph.count(),
        "posterior_mean": out.mat_mean.tolist(),
        "inefficiency": inefficiency_summary(out),
        "diagnostics": out.to_dict()["diagnostics"],
        "timing": {
            "sweep_seconds": secs.tolist(),
            "total_seconds": float(secs.sum()),
            "mean_sweep_seconds": float(secs.mean()),
        },
    }


def _dump_state(exc: SamplerAbort, path) -> str:
    np.savez(path, **{k: np.asarray(v) for k, v in exc.state.items()})
    return str(path)


def cmd_fit(args) -> int:
    seed = resolve_seed(args.seed)
    data = _load_dataset(args)
    validate_inputs(data, Hyperparams())
    theta = resolve_theta(args, data.p)
    config = chain_config(args, seed)
    try:
        body = fit_result(data, theta, config, args.model, stream(seed, 0))
    except SamplerAbort as exc:
        dump = args.state_dump or f"{args.out or 'sssl'}.abort.npz"
        print(f"error: {exc}; state written to {_dump_state(exc, dump)}", file=sys.stderr)
        return EXIT_ABORT
    write_json(envelope("fit", seed, stream=0, **body), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- calibrate


def cmd_calibrate(args) -> int:
    seed = resolve_seed(args.seed)
    pis = args.pi if args.pi is not None else [2.0 / (args.p - 1)]
    thetas = [
        Hyperparams(v0=v0, h=h, pi=pi, lam=args.lam)
        for v0 in args.v0 for h in args.h for pi in pis
    ]
    burnin = args.iterations // 4 if args.burnin is None else args.burnin
    rows = prior_curve(args.p, thetas, args.model, args.iterations, burnin,
                       np.random.default_rng(np.random.SeedSequence(seed)), args.jobs)
    body = {"p": args.p, "model": args.model, "rows": [r.as_dict() for r in rows]}
    if args.target is not None:
        if len(args.v0) != 1 or len(args.h) != 1 or len(pis) < 2:
            raise UsageError("--target needs a single --v0, a single --h and at least two --pi values")
        body["target"] = args.target
        body["calibrated_pi"] = interpolate_crossing(pis, [r.implied_edge_prob for r in rows], args.target)
    write_json(envelope("calibrate", seed, **body), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def _truth(args) -> tuple[SparseTruth, str]:
    name = args.truth
    if name == "paper-p12":
        return paper_p12_covariance(), COVARIANCE
    if name in ("tridiag", "identity"):
        if args.p is None or args.p < 2:
            raise UsageError(f"--truth {name} needs --p of at least 2")
        if name == "tridiag":
            return tridiagonal_truth(args.p, args.diagonal, args.off_diagonal), CONCENTRATION
        return identity_truth(args.p), COVARIANCE
    return SparseTruth.from_values(load_matrix(name)), COVARIANCE


def cmd_simulate(args) -> int:
    seed = resolve_seed(args.seed)
    truth, default_mode = _truth(args)
    mode = args.model or default_mode
    table = sample_gaussian(truth, args.n, stream(seed, 0), mode)
    if args.start_date is not None:
        start = dt.date.fromisoformat(args.start_date)
        table = RawTable(table.values, [f"x{k + 1}" for k in range(table.cols)],
                         [start + dt.timedelta(days=k) for k in range(table.rows)])
    write_csv(table, args.out)
    if args.truth_out:
        np.savetxt(args.truth_out, truth.matrix.values, delimiter=",", fmt="%.17g")
    return EXIT_OK


# ---------------------------------------------------------------- benchmark


def cmd_benchmark(args) -> int:
    seed = resolve_seed(args.seed)
    rows = []
    k = 0
    for p in args.p:
        for mode in (CONCENTRATION, COVARIANCE):
            rng = stream(seed, k)
            k += 1
            data = Dataset(rng.standard_normal((2 * p, p)))
            config = ChainConfig(iterations=args.sweeps, burnin=0, seed=seed, trace_subset=0)
            theta = Hyperparams.default_for(p)
            t0 = time.perf_counter()
            run_sampler(data, theta, config, rng, mode)
            elapsed = time.perf_counter() - t0
            rows.append((p, mode, elapsed * 1000.0 / args.sweeps))
            log.info("p=%d %s: %.3f s per 1000 sweeps", p, mode, rows[-1][2])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["p", "model", "seconds_per_1000_sweeps"])
        for p, mode, s in rows:
            w.writerow([p, mode, f"{s:.6f}"])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


# ---------------------------------------------------------------- rolling


def _fit_window(task):
    index, data, theta, config, mode, seed = task
    try:
        return index, fit_result(data, theta, config, mode, stream(seed, index)), None
    except SamplerAbort as exc:
        return index, None, exc


def cmd_rolling(args) -> int:
    seed = resolve_seed(args.seed)
    raw = load_csv(args.input, has_header=True, time_column=args.time_column)
    skipped = []
    windows = rolling_windows(raw, args.window, args.step, skipped)
    if not windows:
        raise UsageError("no window has enough rows to fit")
    validate_inputs(windows[0].data, Hyperparams())
    theta = resolve_theta(args, raw.cols)
    config = chain_config(args, seed)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    tasks = [(k, w.data, theta, config, args.model, seed) for k, w in enumerate(windows)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_fit_window, tasks))
    else:
        results = map(_fit_window, tasks)

    entries = []
    for k, body, exc in results:
        w = windows[k]
        if exc is not None:
            dump = outdir / f"window_{k:04d}.abort.npz"
            print(f"error: window {k}: {exc}; state written to {_dump_state(exc, dump)}", file=sys.stderr)
            return EXIT_ABORT
        name = f"window_{k:04d}.json"
        write_json(envelope("rolling", seed, stream=k, window_start=w.start.isoformat(),
                            window_end=w.end.isoformat(), **body), outdir / name)
        entries.append({
            "stream": k,
            "start": w.start.isoformat(),
            "end": w.end.isoformat(),
            "n": w.data.n,
            "edge_count": body["edge_count"],
            "result": name,
        })
        log.info("window %s to %s: %d edges", w.start, w.end, body["edge_count"])
    index = envelope(
        "rolling", seed,
        model=args.model, theta=theta.as_dict(), config=config.as_dict(),
        window=args.window, step=args.step, windows=entries, skipped=skipped,
    )
    write_json(index, outdir / "index.json")
    return EXIT_OK


# ---------------------------------------------------------------- metrics


def cmd_metrics(args) -> int:
    result = json.loads(Path(args.result).read_text())
    prob = np.asarray(result["edge_prob"], dtype=float)
    truth = EdgeIndicators.from_matrix(load_matrix(args.truth))
    p = prob.shape[0]
    estimate = EdgeIndicators(p, prob[np.triu_indices(p, 1)] > args.threshold)
    counts = structure_metrics(estimate, truth)
    write_json({"format_version": FORMAT_VERSION, "software_version": __version__,
                "command": "metrics", "threshold": args.threshold, **counts}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sssl", description="Spike-and-slab structure learning for Gaussian graphs")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a graph to a CSV data file")
    f.add_argument("--input", required=True)
    f.add_argument("--header", action="store_true", help="first row holds column names")
    f.add_argument("--time-column", default=None, help="name of a date column to drop (implies --header)")
    f.add_argument("--out", default=None, help="result JSON path (default stdout)")
    f.add_argument("--state-dump", default=None, help="where to write the state if the sampler aborts")
    _add_chain_flags(f)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("calibrate", help="implied prior edge probabilities over a grid")
    c.add_argument("--p", type=int, required=True)
    c.add_argument("--model", choices=MODES, default=CONCENTRATION)
    _add_prior_flags(c, multi=True)
    c.add_argument("--pi", type=_float_list, default=None, help="comma separated pi grid (default 2/(p-1))")
    c.add_argument("--target", type=float, default=None, help="edge probability to calibrate pi to")
    c.add_argument("--iterations", type=int, default=2000)
    c.add_argument("--burnin", type=int, default=None)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", help="write synthetic Gaussian data from a known sparse matrix")
    s.add_argument("--truth", required=True, help="paper-p12, tridiag, identity or a CSV matrix file")
    s.add_argument("--model", choices=MODES, default=None,
                   help="whether the truth is a covariance or a concentration matrix")
    s.add_argument("--p", type=int, default=None)
    s.add_argument("--diagonal", type=float, default=1.0)
    s.add_argument("--off-diagonal", type=float, default=0.45)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--start-date", default=None, help="add a daily date column starting here")
    s.add_argument("--truth-out", default=None, help="also write the truth matrix as CSV")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="time sweeps on null data")
    b.add_argument("--p", type=_int_list, default=[50, 100, 150, 200, 250])
    b.add_argument("--sweeps", type=int, default=1000)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--out", default=None, help="CSV path (default stdout)")
    b.set_defaults(func=cmd_benchmark)

    r = sub.add_parser("rolling", help="fit every window of a dated panel")
    r.add_argument("--input", required=True)
    r.add_argument("--time-column", required=True)
    r.add_argument("--window", default="365d")
    r.add_argument("--step", default="30d")
    r.add_argument("--out-dir", default="rolling")
    r.add_argument("--jobs", type=int, default=1)
    _add_chain_flags(r)
    r.set_defaults(func=cmd_rolling)

    m = sub.add_parser("metrics", help="TP/FP/FN/TN of a fitted graph against a truth matrix")
    m.add_argument("--result", required=True)
    m.add_argument("--truth", required=True)
    m.add_argument("--threshold", type=float, default=0.5)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except SamplerAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (SSSLError, UsageError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
