"""Command-line entry point: ``aquannr {gen-trace,estimate,bench,simulate,replay}``.

Every command that writes a file also writes ``<output>.manifest``: a flat
``key=value`` record of the resolved parameters. ``aquannr replay`` re-runs a
manifest and reproduces the output byte for byte.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path
from typing import Callable

from . import __version__
from .bench import (
    DEFAULT_ESTIMATORS,
    evaluate,
    load_csv,
    measure_optimization,
    spec_label,
    sweep_rows,
    valid_estimator,
    write_bench_csv,
    write_csv,
    write_opt_csv,
)
from .channel import TraceKind, TraceSpec, gen_trace
from .errors import AquaError, ConfigError
from .estimators import (
    CompressionPolicy,
    EmaState,
    NnrConfig,
    RunningStats,
    ar_fit,
    ar_predict,
    combine,
    ema_update,
    nearest_windows,
)
from .netsim import Protocol, SimConfig, run_sim, write_metrics_csv

log = logging.getLogger("aquannr")

DEFAULT_NOISE_SIGMA = 0.25
DEFAULT_JITTER = 0.2
MANIFEST_SUFFIX = ".manifest"
REQUIRED_SIM_KEYS = {"protocols": "dbcar,dbr,carp", "node_counts": "100..200:10"}


class UsageError(AquaError):
    """Bad flags or flag combinations; exit status 2."""


# -- small parsers -------------------------------------------------------------

def parse_int_list(text: str) -> list[int]:
    """``"1,5,9"``, ``"0..9"`` or ``"100..200:10"`` (ranges are inclusive)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, rest = part.split("..", 1)
                hi, _, step = rest.partition(":")
                step_i = int(step) if step else 1
                if step_i <= 0:
                    raise ValueError
                out.extend(range(int(lo), int(hi) + 1, step_i))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"cannot read integer list {text!r}") from None
    if not out:
        raise UsageError(f"empty integer list {text!r}")
    return out


def parse_protocols(text: str) -> list[Protocol]:
    try:
        return [Protocol.parse(p) for p in str(text).split(",") if p.strip()]
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def read_key_values(path) -> dict[str, str]:
    """Flat ``key=value`` text; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    with Path(path).open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_key_values(pairs, path) -> None:
    with Path(path).open("w") as fh:
        for key, value in pairs:
            fh.write(f"{key}={value}\n")


# -- atomic outputs ------------------------------------------------------------

@contextlib.contextmanager
def atomic_output(path):
    """Yield a temporary path next to ``path``; move it into place only on success."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def manifest_path(out) -> Path:
    return Path(str(out) + MANIFEST_SUFFIX)


def write_manifest(subcommand: str, params: dict, out) -> Path:
    pairs = [("subcommand", subcommand), ("tool_version", __version__), ("output", str(out))]
    pairs += [(f"param.{k}", v) for k, v in params.items()]
    mpath = manifest_path(out)
    with atomic_output(mpath) as tmp:
        write_key_values(pairs, tmp)
    return mpath


def threads() -> int:
    raw = os.environ.get("AQUANNR_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"AQUANNR_THREADS must be an integer, got {raw!r}") from None
    return max(0, n)


def parallel_map(fn: Callable, items: list) -> list:
    """Map preserving input order; uses processes when AQUANNR_THREADS > 0."""
    n = threads()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- gen-trace -----------------------------------------------------------------

def trace_params(args) -> dict:
    kind = _kind(args.kind)
    noise = args.noise_sigma
    jitter = args.jitter
    if noise is None:
        noise = 0.0 if kind is TraceKind.IDEAL_PERIOD else DEFAULT_NOISE_SIGMA
    if jitter is None:
        jitter = DEFAULT_JITTER if kind is TraceKind.RANDOM_PERIOD_WITH_NOISE else 0.0
    params = {"kind": kind.value, "length": str(args.length), "base": repr(args.base),
              "amplitude": repr(args.amplitude), "period": str(args.period),
              "noise_sigma": repr(float(noise)), "jitter": repr(float(jitter)),
              "seed": str(args.seed), "interval": repr(args.interval)}
    trace_spec(params)  # validate before anything is written
    return params


def trace_spec(params: dict) -> TraceSpec:
    try:
        return TraceSpec(TraceKind(params["kind"]), length_n=int(params["length"]),
                         base_db=float(params["base"]), amplitude_db=float(params["amplitude"]),
                         period_samples=int(params["period"]),
                         noise_sigma_db=float(params["noise_sigma"]),
                         period_jitter_fraction=float(params["jitter"]),
                         seed=int(params["seed"]), sample_interval_s=float(params["interval"]))
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def run_gen_trace(params: dict, out: Path) -> None:
    write_csv(gen_trace(trace_spec(params)), out)


def _kind(text) -> TraceKind:
    try:
        return TraceKind.parse(text)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


# -- bench -----------------------------------------------------------------------

def bench_params(args) -> dict:
    estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
    bad = [e for e in estimators if not valid_estimator(e)]
    if bad or not estimators:
        raise UsageError(f"unknown estimator(s) {bad}; valid names: mean, ema, ar<p>, nnr")
    params = {"estimators": ",".join(estimators), "sizes": args.sizes,
              "mode": "optimization" if args.optimization else "accuracy"}
    parse_int_list(args.sizes)
    if args.input:
        for p in args.input:
            if not Path(p).is_file():
                raise FileNotFoundError(f"input file not found: {p}")
        params["inputs"] = ",".join(str(p) for p in args.input)
    else:
        kinds = [_kind(k) for k in (args.kind or ["ideal"])]
        params["kinds"] = ",".join(k.value for k in kinds)
        params["seeds"] = args.seeds
        parse_int_list(args.seeds)
        params["period"] = str(args.period)
        params["amplitude"] = repr(args.amplitude)
        if args.noise_sigma is not None:
            params["noise_sigma"] = repr(args.noise_sigma)
        if args.jitter is not None:
            params["jitter"] = repr(args.jitter)
    params["window"] = str(args.window)
    params["k"] = str(args.k)
    return params


def bench_specs(params: dict) -> list[TraceSpec]:
    specs = []
    for kind_name in params["kinds"].split(","):
        kind = TraceKind(kind_name)
        noisy = kind is not TraceKind.IDEAL_PERIOD
        noise = float(params.get("noise_sigma", DEFAULT_NOISE_SIGMA)) if noisy else 0.0
        jitter = (float(params.get("jitter", DEFAULT_JITTER))
                  if kind is TraceKind.RANDOM_PERIOD_WITH_NOISE else 0.0)
        seeds = parse_int_list(params["seeds"]) if noisy else [0]
        for seed in seeds:
            specs.append(TraceSpec(kind, period_samples=int(params["period"]),
                                   amplitude_db=float(params["amplitude"]),
                                   noise_sigma_db=noise, period_jitter_fraction=jitter,
                                   seed=seed))
    return specs


def _bench_cell(cell):
    label, series, estimators, cfg = cell
    return label, len(series), evaluate(series, estimators, cfg)


def run_bench(params: dict, out: Path) -> None:
    cfg = NnrConfig(window_m=int(params["window"]), k=int(params["k"]))
    sizes = parse_int_list(params["sizes"])
    if params["mode"] == "optimization":
        write_opt_csv(measure_optimization(sizes, cfg, CompressionPolicy()), out)
        return
    estimators = params["estimators"].split(",")
    cells = []
    if "inputs" in params:
        for p in params["inputs"].split(","):
            series = load_csv(p)
            for size in sizes:
                if size <= len(series):
                    cells.append((Path(p).stem, series.values[:size].copy(), estimators, cfg))
            if all(size > len(series) for size in sizes):
                cells.append((Path(p).stem, series.values.copy(), estimators, cfg))
    else:
        for spec in bench_specs(params):
            for size in sizes:
                series = gen_trace(replace(spec, length_n=size))
                cells.append((spec_label(spec), series, estimators, cfg))
    table = parallel_map(_bench_cell, cells)
    write_bench_csv(sweep_rows(table), out)


# -- simulate --------------------------------------------------------------------

def simulate_params(args) -> dict:
    values = read_key_values(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if args.protocols:
        values["protocols"] = args.protocols
    if args.nodes:
        values["node_counts"] = args.nodes
    if args.seeds:
        values["seeds"] = args.seeds
    if "protocols" not in values and "protocol" in values:
        values["protocols"] = values.pop("protocol")
    if "node_counts" not in values and "node_count" in values:
        values["node_counts"] = values.pop("node_count")
    if "seeds" not in values:
        values["seeds"] = values.pop("seed", "0")
    for key, suggestion in REQUIRED_SIM_KEYS.items():
        if key not in values:
            raise ConfigError(f"missing required key {key!r} (for example {key}={suggestion})")
    grid = {k: values.pop(k) for k in ("protocols", "node_counts", "seeds")}
    protocols = parse_protocols(grid["protocols"])
    node_counts = parse_int_list(grid["node_counts"])
    seeds = parse_int_list(grid["seeds"])
    base = SimConfig.from_mapping(values)
    for n in node_counts:  # surface invalid node counts before running anything
        replace(base, node_count=n)
    params = {"protocols": ",".join(p.value for p in protocols),
              "node_counts": ",".join(map(str, node_counts)),
              "seeds": ",".join(map(str, seeds))}
    skip = {"protocol", "node_count", "seed"}
    params.update((k, v) for k, v in base.to_pairs() if k not in skip)
    return params


def sim_grid(params: dict) -> list[SimConfig]:
    values = {k: v for k, v in params.items() if k not in ("protocols", "node_counts", "seeds")}
    base = SimConfig.from_mapping(values)
    return [replace(base, protocol=p, node_count=n, seed=s)
            for p in parse_protocols(params["protocols"])
            for n in parse_int_list(params["node_counts"])
            for s in parse_int_list(params["seeds"])]


def _sim_cell(cfg: SimConfig) -> tuple:
    return run_sim(cfg).row(cfg)


def run_simulate(params: dict, out: Path) -> None:
    grid = sim_grid(params)
    log.info("simulating %d cells", len(grid))
    write_metrics_csv(parallel_map(_sim_cell, grid), out)


# -- estimate --------------------------------------------------------------------

def cmd_estimate(args) -> int:
    series = load_csv(args.input)
    x = series.values
    lines = []
    if args.method == "mean":
        stats = RunningStats()
        for v in x.tolist():
            stats.push(v)
        lines.append(f"prediction={stats.mean!r}")
    elif args.method == "ema":
        state = EmaState(args.alpha)
        for v in x.tolist():
            state = ema_update(state, v)
        lines.append(f"prediction={state.s!r}")
    elif args.method == "ar":
        if args.order < 1:
            raise UsageError("--order must be at least 1")
        if len(x) < args.order + 2:
            raise UsageError(f"AR({args.order}) needs at least {args.order + 2} samples, got {len(x)}")
        model = ar_fit(series, args.order)
        lines.append(f"prediction={ar_predict(model, series)!r}")
    else:
        cfg = _nnr_cfg(args)
        if len(series) < cfg.window_m + 1:
            raise UsageError(f"NNR needs at least {cfg.window_m + 1} samples, got {len(series)}")
        nb = nearest_windows(series, cfg)
        lines.append(f"prediction={combine(nb.distances, nb.labels, cfg)!r}")
        if args.trace:
            for j, d, label in zip(nb.starts.tolist(), nb.distances.tolist(), nb.labels.tolist()):
                lines.append(f"neighbour start={j} distance={d!r} label={label!r}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with atomic_output(args.out) as tmp:
            tmp.write_text(text)
        write_manifest("estimate", {"input": str(args.input), "method": args.method}, args.out)
    return 0


def _nnr_cfg(args) -> NnrConfig:
    try:
        return NnrConfig(window_m=args.window, k=args.k)
    except AquaError as exc:
        raise UsageError(str(exc)) from None


# -- driver --------------------------------------------------------------------

RUNNERS = {"gen-trace": run_gen_trace, "bench": run_bench, "simulate": run_simulate}


def produce(subcommand: str, params: dict, out) -> None:
    """Write the output atomically, then its manifest."""
    out = Path(out)
    with atomic_output(out) as tmp:
        RUNNERS[subcommand](params, tmp)
    try:
        write_manifest(subcommand, params, out)
    except BaseException:
        out.unlink(missing_ok=True)
        raise


def cmd_replay(args) -> int:
    raw = read_key_values(args.manifest)
    sub = raw.get("subcommand")
    if sub not in RUNNERS:
        raise ConfigError(f"{args.manifest}: cannot replay subcommand {sub!r}")
    params = {k[len("param."):]: v for k, v in raw.items() if k.startswith("param.")}
    out = args.out or raw.get("output")
    if not out:
        raise ConfigError(f"{args.manifest}: no output path recorded")
    produce(sub, params, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aquannr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-trace", help="write a synthetic SNR trace")
    g.add_argument("--kind", default="ideal", help="ideal, noise or random (or the full names)")
    g.add_argument("--length", type=int, default=1000)
    g.add_argument("--period", type=int, default=24, help="samples per period")
    g.add_argument("--base", type=float, default=15.0, help="mean level, dB")
    g.add_argument("--amplitude", type=float, default=5.0, help="peak excursion, dB")
    g.add_argument("--noise-sigma", type=float, default=None,
                   help=f"dB; default 0 for ideal, {DEFAULT_NOISE_SIGMA} otherwise")
    g.add_argument("--jitter", type=float, default=None,
                   help=f"period jitter fraction; default {DEFAULT_JITTER} for random")
    g.add_argument("--interval", type=float, default=1.0, help="seconds between samples")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="predict the next sample of a trace")
    e.add_argument("--input", required=True)
    e.add_argument("--method", choices=("mean", "ema", "ar", "nnr"), default="nnr")
    e.add_argument("--order", type=int, default=2, help="AR order")
    e.add_argument("--alpha", type=float, default=0.2, help="EMA smoothing factor")
    e.add_argument("--window", type=int, default=3, help="NNR window length")
    e.add_argument("-k", type=int, default=3, help="NNR neighbour count")
    e.add_argument("--trace", action="store_true", help="list the NNR neighbour windows")
    e.add_argument("--out", default=None, help="also write the report here")

    b = sub.add_parser("bench", help="compare estimators on traces")
    b.add_argument("--input", action="append", help="trace CSV (repeatable)")
    b.add_argument("--kind", action="append", help="generator kind (repeatable); default ideal")
    b.add_argument("--seeds", default="0", help="generator seeds for noisy kinds, e.g. 0..9")
    b.add_argument("--sizes", default="1000..10000:1000")
    b.add_argument("--period", type=int, default=24)
    b.add_argument("--amplitude", type=float, default=5.0)
    b.add_argument("--noise-sigma", type=float, default=None)
    b.add_argument("--jitter", type=float, default=None)
    b.add_argument("--estimators", default=",".join(DEFAULT_ESTIMATORS))
    b.add_argument("--window", type=int, default=3)
    b.add_argument("-k", type=int, default=3)
    b.add_argument("--optimization", action="store_true",
                   help="time naive/indexed/compressed NNR instead of ranking estimators")
    b.add_argument("--out", default="bench.csv")

    s = sub.add_parser("simulate", help="run the routing simulator over a grid")
    s.add_argument("--config", help="key=value file; every SimConfig field is accepted")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one key")
    s.add_argument("--protocols", help="e.g. dbcar,dbr,carp")
    s.add_argument("--nodes", help="node counts, e.g. 100..200:10")
    s.add_argument("--seeds", help="e.g. 0..9 (default 0)")
    s.add_argument("--out", default="metrics.csv")

    r = sub.add_parser("replay", help="re-run a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", default=None, help="write here instead of the recorded path")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.command == "gen-trace":
            produce("gen-trace", trace_params(args), args.out)
        elif args.command == "bench":
            produce("bench", bench_params(args), args.out)
        elif args.command == "simulate":
            produce("simulate", simulate_params(args), args.out)
        elif args.command == "estimate":
            return cmd_estimate(args)
        elif args.command == "replay":
            return cmd_replay(args)
        return 0
    except (UsageError, ConfigError) as exc:
        parser.error(str(exc))
    except (OSError, AquaError) as exc:
        print(f"aquannr: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
