"""Benchmark harness: run the optimizer on built-in problems over several seeds and write CSV results.

Run mode (the default)::

    python -m bsmobo --problem zdt1 --dim 8 --budget 160 --init 60 --batch 5 --seeds 5 --out runs/zdt1

Summary mode over finished runs::

    python -m bsmobo summarize runs/zdt1 runs/zdt2 --out summary.csv

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .core import Archive, nondominated_subset
from .optimizer import IterationTrace, RunConfig, run
from .problems import PROBLEM_NAMES, ProblemNotAvailable, get_problem
from .surrogate import TrainingConfig

log = logging.getLogger("bsmobo.cli")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

TRACE_COLUMNS = ["iter", "archive_size", "igd", "hypervolume", "train_seconds", "inner_seconds", "select_seconds"]
SUMMARY_COLUMNS = ["problem", "runs", "igd_mean", "igd_std", "igd_median", "hv_mean", "hv_std", "hv_median"]

# flag name -> (type, default); config files use the same names with - or _
RUN_OPTIONS: dict[str, tuple[type, object]] = {
    "problem": (str, None),
    "dim": (int, 8),
    "objectives": (int, None),
    "budget": (int, 160),
    "init": (int, 60),
    "batch": (int, 5),
    "pop": (int, 100),
    "seeds": (int, 1),
    "seed_list": (str, None),
    "gradients": (bool, False),
    "mc_samples": (int, 20),
    "inner_gens": (int, 100),
    "epochs": (int, 2000),
    "lr": (float, 1e-3),
    "sobolev_weight": (float, 1.0),
    "out": (str, None),
}


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 2."""


def fmt(v) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config_file(path: str | Path) -> dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out: dict[str, object] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RUN_OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}; known keys: {', '.join(RUN_OPTIONS)}")
        kind = RUN_OPTIONS[key][0]
        try:
            out[key] = parse_bool(value) if kind is bool else kind(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def build_run_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bsmobo", description="Run the optimizer on a benchmark problem.")
    p.add_argument("--problem", help=f"one of {', '.join(PROBLEM_NAMES)}")
    p.add_argument("--dim", type=int, help="decision-space dimension n (default 8)")
    p.add_argument("--objectives", type=int, help="objective count for DTLZ problems (default 3)")
    p.add_argument("--budget", type=int, help="total true evaluations (default 160)")
    p.add_argument("--init", type=int, help="initial Latin hypercube size (default 60)")
    p.add_argument("--batch", type=int, help="points per iteration k (default 5)")
    p.add_argument("--pop", type=int, help="MOEA/D population p (default 100)")
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, help="run seeds 0..N-1 (default 1)")
    seeds.add_argument("--seed-list", help="comma-separated explicit seeds")
    p.add_argument("--gradients", action="store_true", default=None, help="Sobolev training on true gradients")
    p.add_argument("--mc-samples", type=int, help="dropout forward passes per prediction (default 20)")
    p.add_argument("--inner-gens", type=int, help="MOEA/D generations per iteration (default 100)")
    p.add_argument("--epochs", type=int, help="training epochs per network (default 2000)")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 1e-3)")
    p.add_argument("--sobolev-weight", type=float, help="weight of the gradient term (default 1.0)")
    p.add_argument("--out", help="output directory (default runs/<problem>)")
    p.add_argument("--config", help="key = value file; its entries override flags")
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    return p


def resolve_options(ns: argparse.Namespace) -> dict[str, object]:
    opts = {k: default for k, (_, default) in RUN_OPTIONS.items()}
    for k in RUN_OPTIONS:
        v = getattr(ns, k, None)
        if v is not None:
            opts[k] = v
    if ns.config:
        file_opts = read_config_file(ns.config)
        if "seeds" in file_opts:
            opts["seed_list"] = None
        if "seed_list" in file_opts:
            opts["seeds"] = None
        opts.update(file_opts)
    if not opts["problem"]:
        raise UsageError(f"--problem is required; choose one of {', '.join(PROBLEM_NAMES)}")
    if opts["out"] is None:
        opts["out"] = str(Path("runs") / str(opts["problem"]).lower())
    return opts


def seed_list(opts: dict[str, object]) -> list[int]:
    if opts.get("seed_list"):
        try:
            seeds = [int(s) for s in str(opts["seed_list"]).split(",") if s.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --seed-list {opts['seed_list']!r}") from exc
    else:
        count = int(opts["seeds"] or 1)
        if count < 1:
            raise UsageError("--seeds must be >= 1")
        seeds = list(range(count))
    if not seeds or len(set(seeds)) != len(seeds):
        raise UsageError("seed list must be nonempty and free of repeats")
    return seeds


def make_config(opts: dict[str, object], problem, seed: int) -> RunConfig:
    training = TrainingConfig(
        epochs=int(opts["epochs"]), learning_rate=float(opts["lr"]), sobolev_weight=float(opts["sobolev_weight"])
    )
    return RunConfig(
        n=problem.n,
        m=problem.m,
        bounds=problem.bounds,
        budget=int(opts["budget"]),
        init_count=int(opts["init"]),
        batch_size=int(opts["batch"]),
        population=int(opts["pop"]),
        mc_samples=int(opts["mc_samples"]),
        use_gradients=bool(opts["gradients"]),
        training=training,
        inner_generations=int(opts["inner_gens"]),
        seed=seed,
    )


# CSV io ----------------------------------------------------------------------


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))


def archive_rows(archive: Archive, indices=None):
    X, F = archive.X(), archive.F()
    idx = range(len(archive)) if indices is None else indices
    for i in idx:
        yield [i, *X[i], *F[i]]


def archive_header(n: int, m: int) -> list[str]:
    return ["eval_index", *(f"x_{i}" for i in range(n)), *(f"f_{j}" for j in range(m))]


def write_run(directory: Path, archive: Archive, traces: list[IterationTrace], n: int, m: int) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    header = archive_header(n, m)
    write_csv(directory / "archive.csv", header, archive_rows(archive))
    F = archive.F()
    write_csv(directory / "front.csv", header, archive_rows(archive, nondominated_subset(F)))
    write_csv(
        directory / "trace.csv",
        TRACE_COLUMNS,
        (
            [t.iteration, t.archive_size, t.igd, t.hypervolume, t.train_seconds, t.inner_seconds, t.select_seconds]
            for t in traces
        ),
    )


def cached_reference_front(out: Path, problem) -> np.ndarray:
    """Reference front stored under the output directory; reused verbatim when present."""
    path = out / "reference_front.csv"
    if path.exists():
        _, front = read_csv(path)
        if front.shape[1] == problem.m:
            return front
    front = problem.reference_front(500 if problem.m == 2 else 990)
    write_csv(path, [f"f_{j}" for j in range(problem.m)], front)
    return front


# summaries -------------------------------------------------------------------


def find_seed_dirs(path: Path) -> list[Path]:
    if (path / "trace.csv").exists():
        return [path]
    found = sorted(p.parent for p in path.glob("*/trace.csv"))
    if not found:
        raise FileNotFoundError(f"no trace.csv under {path}")
    return found


def problem_label(seed_dir: Path) -> str:
    for meta in (seed_dir / "run.json", seed_dir.parent / "manifest.json"):
        if meta.exists():
            return json.loads(meta.read_text())["problem"]
    return seed_dir.parent.name


def final_metrics(seed_dir: Path) -> tuple[float, float]:
    header, rows = read_csv(seed_dir / "trace.csv")
    if len(rows) == 0:
        raise ValueError(f"{seed_dir / 'trace.csv'} has no iterations")
    last = rows[-1]
    return float(last[header.index("igd")]), float(last[header.index("hypervolume")])


def summarize(run_dirs: list[str | Path]) -> list[dict[str, object]]:
    """Per-problem mean, population std and median of the final IGD and hypervolume."""
    groups: dict[str, list[tuple[float, float]]] = {}
    for d in run_dirs:
        for seed_dir in find_seed_dirs(Path(d)):
            groups.setdefault(problem_label(seed_dir), []).append(final_metrics(seed_dir))
    table = []
    for name, vals in groups.items():
        igd_v = np.array([v[0] for v in vals])
        hv_v = np.array([v[1] for v in vals])
        table.append(
            {
                "problem": name,
                "runs": len(vals),
                "igd_mean": float(np.mean(igd_v)),
                "igd_std": float(np.std(igd_v)),
                "igd_median": float(np.median(igd_v)),
                "hv_mean": float(np.mean(hv_v)),
                "hv_std": float(np.std(hv_v)),
                "hv_median": float(np.median(hv_v)),
            }
        )
    return table


def write_summary(path: Path, table: list[dict[str, object]]) -> None:
    write_csv(path, SUMMARY_COLUMNS, ([row[c] for c in SUMMARY_COLUMNS] for row in table))


def print_summary(table: list[dict[str, object]]) -> None:
    print(f"{'problem':<10} {'runs':>4} {'IGD mean[std]':>24} {'IGD median':>11} {'HV mean[std]':>24}")
    for r in table:
        print(
            f"{r['problem']:<10} {r['runs']:>4} {r['igd_mean']:>12.4g} [{r['igd_std']:<9.3g}] {r['igd_median']:>11.4g}"
            f" {r['hv_mean']:>12.4g} [{r['hv_std']:<9.3g}]"
        )


def main_summarize(argv: list[str]) -> int:
    p = argparse.ArgumentParser(prog="bsmobo summarize", description="Summarize finished runs.")
    p.add_argument("run_dirs", nargs="+", help="run directories or single-seed directories")
    p.add_argument("--out", help="summary CSV path (default: <dir>/summary.csv for one dir, else ./summary.csv)")
    ns = p.parse_args(argv)
    try:
        table = summarize(ns.run_dirs)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(ns.out) if ns.out else (Path(ns.run_dirs[0]) / "summary.csv" if len(ns.run_dirs) == 1 else Path("summary.csv"))
    write_summary(out, table)
    print_summary(table)
    return EXIT_OK


# run mode --------------------------------------------------------------------


def limit_threads():
    """Context manager capping BLAS threads at BSMOBO_THREADS when set."""
    from contextlib import nullcontext

    value = os.environ.get("BSMOBO_THREADS")
    if not value:
        return nullcontext()
    try:
        limit = int(value)
    except ValueError as exc:
        raise UsageError(f"BSMOBO_THREADS must be an integer, got {value!r}") from exc
    if limit < 1:
        raise UsageError("BSMOBO_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


def main_run(argv: list[str]) -> int:
    ns = build_run_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    logging.getLogger("bsmobo").setLevel(logging.INFO if ns.verbose else logging.WARNING)
    log.setLevel(logging.INFO)
    try:
        opts = resolve_options(ns)
        try:
            problem = get_problem(str(opts["problem"]), int(opts["dim"]), opts["objectives"])
        except ProblemNotAvailable as exc:
            raise UsageError(str(exc)) from exc
        except ValueError as exc:
            raise UsageError(f"cannot build problem: {exc}") from exc
        seeds = seed_list(opts)
        configs = {s: make_config(opts, problem, s) for s in seeds}
        for cfg in configs.values():
            cfg.validate()
        threads = limit_threads()
    except (UsageError, ValueError) as exc:  # ConfigError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(str(opts["out"]))
    try:
        out.mkdir(parents=True, exist_ok=True)
        seed_dirs = {s: out / f"seed-{s}" for s in seeds}
        manifest = {
            "version": __version__,
            "problem": problem.name,
            "n": problem.n,
            "m": problem.m,
            "seeds": seeds,
            "out": str(out),
            "hv_reference": problem.hv_reference().tolist(),
            "options": opts,
            "config": _config_echo(configs[seeds[0]]),
            "runs": {
                str(s): {name: str(d / name) for name in ("archive.csv", "trace.csv", "front.csv")}
                for s, d in seed_dirs.items()
            },
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        front = cached_reference_front(out, problem)
        with threads:
            for s in seeds:
                log.info("%s seed %d: running", problem.name, s)
                archive, traces = run(configs[s], problem, front)
                write_run(seed_dirs[s], archive, traces, problem.n, problem.m)
                (seed_dirs[s] / "run.json").write_text(json.dumps({"problem": problem.name, "seed": s}) + "\n")
                log.info("%s seed %d: final IGD %.6g", problem.name, s, traces[-1].igd)
        table = summarize([out])
        write_summary(out / "summary.csv", table)
        print_summary(table)
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to one exit code
        log.error("run failed: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    return EXIT_OK


def _config_echo(cfg: RunConfig) -> dict[str, object]:
    d = asdict(cfg)
    d["bounds"] = {"lower": cfg.bounds.lower.tolist(), "upper": cfg.bounds.upper.tolist()}
    d.pop("seed")
    return d


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "summarize":
        return main_summarize(argv[1:])
    if argv and argv[0] == "run":
        argv = argv[1:]
    try:
        return main_run(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
