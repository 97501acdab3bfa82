"""Command-line interface: fitting, sensitivity analysis, optimization runs,
and the two-stage benchmark validation, all reproducible from a manifest.

Every command resolves its configuration (config file, then flag overrides),
writes out_dir/manifest.json first, runs, then finalizes the manifest. A
crash leaves the manifest with status "running" so partial outputs are
identifiable; `mvgsa rerun <manifest>` re-executes the recorded command with
the recorded configuration. All randomness derives from the single root seed
in the manifest through tagged per-component streams.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, benchfns, gsa, lvgp, mobo
from .sampling import SamplingError, initial_doe, sobol_unit, unit_sample_to_mixed
from .seeds import child_seed, derive_seed_sequence
from .space import (
    Dataset,
    DatasetError,
    MixedPoint,
    SpaceError,
    csv_header,
    dataset_from_csv,
    points_to_arrays,
    space_from_json,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_config_file(path) -> dict:
    """Flat `key = value` lines; '#' starts a comment. Keys use the flag
    names with dashes or underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="mvgsa", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out-dir", default="runs/latest", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="root seed")
        p.add_argument("--threads", type=int, default=0,
                       help="cap BLAS worker threads (0 = library default)")

    p = sub.add_parser("fit", help="fit LVGP models to a dataset")
    common(p)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--space", help="design space JSON")
    p.add_argument("--holdout-frac", type=float, default=0.2)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--nugget", type=float, default=1e-8)

    p = sub.add_parser("gsa", help="estimate Sobol' indices")
    common(p)
    p.add_argument("--evaluator", help="direct:<name> or model:<path>")
    p.add_argument("--n-base", type=int, default=gsa.DEFAULT_N_DIRECT)
    p.add_argument("--chart-data", help="also write bar-chart CSV here")

    p = sub.add_parser("bo", help="run multi-objective Bayesian optimization")
    common(p)
    p.add_argument("--framework", choices=["vanilla", "sensitivity-aware"],
                   default="vanilla")
    p.add_argument("--evaluator")
    p.add_argument("--doe-n", type=int, default=16)
    p.add_argument("--stage1-iters", type=int, default=58)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--oracle-front", help="JSON file with known front points")
    p.add_argument("--history", action="store_true",
                   help="emit per-iteration front-size/hypervolume CSV")

    p = sub.add_parser("validate", help="two-stage mixed-variable GSA validation")
    common(p)
    p.add_argument("--function", choices=["ishigami", "hartmann6"])
    p.add_argument("--levels", help="comma-separated level counts")
    p.add_argument("--train-factor", type=int, default=40)
    p.add_argument("--train-cap", type=int, default=400)
    p.add_argument("--n-direct", type=int, default=gsa.DEFAULT_N_DIRECT)
    p.add_argument("--n-meta", type=int, default=gsa.DEFAULT_N_METAMODEL)
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--fit-starts", type=int, default=4)
    p.add_argument("--grid", choices=["midpoint", "endpoint"], default="midpoint")
    p.add_argument("--convert", help="comma-separated variables to discretize")

    p = sub.add_parser("sample", help="dump a mixed sample as CSV")
    common(p)
    p.add_argument("--space")
    p.add_argument("--n", type=int)
    p.add_argument("--method", choices=["doe", "sobol"], default="doe")

    p = sub.add_parser("rerun", help="re-execute a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="override the output directory")
    return parser


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def _write_manifest(out_dir: Path, command: str, config: dict, outputs: list,
                    status: str, extra: dict | None = None) -> None:
    import scipy
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "status": status,
        "outputs": outputs,
        "versions": {"mvgsa": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _resolve_evaluator(name: str):
    if name.startswith("direct:"):
        try:
            return benchfns.get_evaluator(name.split(":", 1)[1])
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
    if name.startswith("model:"):
        path = name.split(":", 1)[1]
        try:
            model = lvgp.LvgpModel.load(path)
        except OSError as exc:
            raise DataError(f"cannot read model file {path}: {exc}") from exc
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed model file {path}: {exc}") from exc
        return model.as_evaluator(tag=f"model:{Path(path).name}")
    raise UsageError(f"evaluator must be direct:<name> or model:<path>, got {name!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fit(args, out_dir: Path, config: dict) -> list[str]:
    try:
        space = space_from_json(args.space)
        data = dataset_from_csv(args.data, space)
    except OSError as exc:
        raise DataError(f"cannot read input: {exc}") from exc
    except (SpaceError, DatasetError) as exc:
        raise DataError(str(exc)) from exc

    rng = np.random.default_rng(derive_seed_sequence(args.seed, "holdout-split"))
    n_hold = int(round(args.holdout_frac * data.n))
    order = rng.permutation(data.n)
    hold_rows, train_rows = order[:n_hold], order[n_hold:]
    if len(train_rows) < 2:
        raise DataError("not enough rows left for training after holdout split")

    outputs = []
    report = {"n": data.n, "n_train": len(train_rows), "n_holdout": n_hold,
              "responses": []}
    for k in range(data.p):
        sub = Dataset(space, tuple(data.inputs[i] for i in train_rows),
                      data.outputs[train_rows, k])
        cfg = lvgp.FitConfig(starts=args.starts, max_iters=args.max_iters,
                             nugget=args.nugget,
                             seed=child_seed(args.seed, "fit", k))
        model = lvgp.fit(sub, cfg)
        model_path = out_dir / f"model_y{k + 1}.json"
        model.save(model_path)
        outputs.append(model_path.name)

        latent_path = out_dir / f"latent_map_y{k + 1}.csv"
        with open(latent_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variable", "level", "z1", "z2"])
            for j, var in enumerate(space.qualitative):
                for level in range(1, var.num_levels + 1):
                    z = model.latent_map.coords[j][level - 1]
                    writer.writerow([var.name, level, repr(float(z[0])), repr(float(z[1]))])
        outputs.append(latent_path.name)

        entry = {"response": f"y_{k + 1}", "neg_log_likelihood": model.nll,
                 "nugget": model.params.nugget,
                 "free_parameters": model.n_free_params}
        if n_hold > 0:
            hold = Dataset(space, tuple(data.inputs[i] for i in hold_rows),
                           data.outputs[hold_rows, k])
            entry["holdout_rmse_rel"] = lvgp.relative_rmse(model, hold)
        report["responses"].append(entry)

    report_path = out_dir / "fit_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    outputs.append(report_path.name)
    return outputs


def cmd_gsa(args, out_dir: Path, config: dict) -> list[str]:
    evaluator = _resolve_evaluator(args.evaluator)
    outputs = []
    chart_rows = []
    for k in range(evaluator.n_outputs):
        column = evaluator.column(k) if evaluator.n_outputs > 1 else evaluator
        indices = gsa.estimate_indices(column, n_base=args.n_base,
                                       seed=child_seed(args.seed, "gsa", k))
        suffix = f"_y{k + 1}" if evaluator.n_outputs > 1 else ""
        csv_path = out_dir / f"indices{suffix}.csv"
        indices.to_csv(csv_path)
        indices.to_json(out_dir / f"indices{suffix}.json")
        outputs += [csv_path.name, f"indices{suffix}.json"]
        for i, name in enumerate(indices.variables):
            chart_rows.append([name, f"y_{k + 1}",
                               float(indices.msi_clamped[i]),
                               float(indices.tsi_clamped[i])])
    if args.chart_data:
        with open(args.chart_data, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variable", "response", "msi", "tsi"])
            writer.writerows(chart_rows)
        outputs.append(str(args.chart_data))
    return outputs


def _load_oracle_front(path) -> list[MixedPoint]:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read oracle front {path}: {exc}") from exc
    pts = payload["front"] if isinstance(payload, dict) else payload
    return [MixedPoint((), tuple(int(v) for v in p)) for p in pts]


def cmd_bo(args, out_dir: Path, config: dict) -> list[str]:
    evaluator = _resolve_evaluator(args.evaluator)
    oracle = _load_oracle_front(args.oracle_front) if args.oracle_front else None
    if args.framework == "vanilla":
        trace = mobo.vanilla_bo(evaluator, doe=args.doe_n, budget=args.budget,
                                seed=args.seed, oracle_front=oracle)
    else:
        trace = mobo.sensitivity_aware_bo(evaluator, doe_n=args.doe_n,
                                          stage1_iters=args.stage1_iters,
                                          budget=args.budget, seed=args.seed,
                                          oracle_front=oracle)
    outputs = []
    trace_path = out_dir / "trace.csv"
    trace.to_csv(trace_path)
    outputs.append(trace_path.name)

    archive = mobo.ParetoArchive(("max",) * evaluator.n_outputs)
    for i, r in enumerate(trace.records):
        archive.add(r.point, r.objectives, i)
    front_path = out_dir / "front.csv"
    space = evaluator.space
    with open(front_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(space, evaluator.n_outputs))
        for e in sorted(archive.front(), key=lambda e: e.point.qualitative):
            writer.writerow([repr(x) for x in e.point.quantitative]
                            + list(e.point.qualitative)
                            + [repr(v) for v in e.values])
    outputs.append(front_path.name)

    if args.history:
        history_path = out_dir / "history.csv"
        Y = trace.objectives_array()
        ref = Y.min(axis=0)
        with open(history_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["evaluations", "front_size", "hypervolume"])
            for k in range(1, len(Y) + 1):
                mask = mobo.pareto_filter(Y[:k])
                hv = (mobo.hypervolume_2d(Y[:k][mask], ref)
                      if Y.shape[1] == 2 else float("nan"))
                writer.writerow([k, int(mask.sum()), repr(float(hv))])
        outputs.append(history_path.name)

    meta = {"framework": args.framework,
            "n_evaluations": trace.n_evaluations,
            "oracle_found_at": trace.meta.get("oracle_found_at"),
            "focus_variables": trace.meta.get("focus_variables"),
            "stage1_optimal_combos": trace.meta.get("stage1_optimal_combos")}
    (out_dir / "bo_summary.json").write_text(json.dumps(meta, indent=2) + "\n")
    outputs.append("bo_summary.json")
    return outputs


def cmd_validate(args, out_dir: Path, config: dict) -> list[str]:
    try:
        levels = [int(v) for v in args.levels.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --levels: {exc}") from exc
    if not levels:
        raise UsageError("--levels must name at least one level count")
    base = benchfns.ISHIGAMI if args.function == "ishigami" else benchfns.HARTMANN6
    if args.convert:
        positions = tuple(base.arg_names.index(v.strip())
                          for v in args.convert.split(","))
    else:
        positions = benchfns.default_conversion(base.name)

    def make_mixed(levels_count):
        return benchfns.discretize(base, positions, levels_count,
                                   placement=args.grid).evaluator()

    study = gsa.convergence_study(
        make_mixed,
        base.evaluator(),
        levels,
        train_n=lambda L: min(args.train_factor * L, args.train_cap),
        seeds=[child_seed(args.seed, "rep", i) for i in range(args.n_seeds)],
        n_direct=args.n_direct,
        n_metamodel=args.n_meta,
        fit_config=lvgp.FitConfig(starts=args.fit_starts, max_iters=150),
    )
    report_path = out_dir / "validate_report.csv"
    study.to_csv(report_path)

    summary = {"function": args.function, "levels": levels,
               "max_abs_deviation_mv_vs_true_mv": study.max_abs_deviation(),
               "per_level": {}}
    for L in levels:
        cells = [c for c in study.cells() if c[0] == L]
        summary["per_level"][str(L)] = {
            "max_abs_dev": max(abs(m - d) for *_x, m, d in cells),
            "mean_abs_dev": float(np.mean([abs(m - d) for *_x, m, d in cells])),
        }
    summary_path = out_dir / "validate_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return [report_path.name, summary_path.name]


def cmd_sample(args, out_dir: Path, config: dict) -> list[str]:
    try:
        space = space_from_json(args.space)
    except OSError as exc:
        raise DataError(f"cannot read space: {exc}") from exc
    except SpaceError as exc:
        raise DataError(str(exc)) from exc
    if args.method == "doe":
        points = initial_doe(space, args.n, args.seed)
    else:
        unit = sobol_unit(space.d, args.n,
                          scramble_seed=derive_seed_sequence(args.seed, "sample"))
        points = unit_sample_to_mixed(unit, space).points()
    path = out_dir / "sample.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(space, 0))
        for p in points:
            writer.writerow([repr(x) for x in p.quantitative]
                            + list(p.qualitative))
    return [path.name]


REQUIRED = {
    "fit": ("data", "space"),
    "gsa": ("evaluator",),
    "bo": ("evaluator",),
    "validate": ("function", "levels"),
    "sample": ("space", "n"),
}

COMMANDS = {
    "fit": cmd_fit,
    "gsa": cmd_gsa,
    "bo": cmd_bo,
    "validate": cmd_validate,
    "sample": cmd_sample,
}


def _run_command(args) -> int:
    missing = [k for k in REQUIRED[args.command] if getattr(args, k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"{args.command} requires {flags} (flag or config file)")
    out_dir = Path(args.out_dir)
    config = {k: v for k, v in vars(args).items()
              if k not in ("command", "config") and v is not None}
    config["command"] = args.command
    _write_manifest(out_dir, args.command, config, [], status="running")
    t0 = time.perf_counter()
    outputs = COMMANDS[args.command](args, out_dir, config)
    _write_manifest(out_dir, args.command, config, outputs, status="complete",
                    extra={"elapsed_seconds": round(time.perf_counter() - t0, 3)})
    return EXIT_OK


def _rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc}") from exc
    config = dict(manifest["config"])
    command = config.pop("command")
    argv = [command]
    for key, value in config.items():
        if key == "out_dir" and args.out_dir:
            value = args.out_dir
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv += [flag, str(value)]
    parsed = build_parser().parse_args(argv)
    return _run_command(parsed)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 0):
            try:
                from threadpoolctl import threadpool_limits
                threadpool_limits(args.threads)
            except ImportError:
                pass
        if args.command == "rerun":
            return _rerun(args)
        if args.config:
            defaults = _read_config_file(args.config)
            parser = build_parser()
            known = {a.replace("-", "_") for a in vars(args)}
            bad = set(defaults) - known
            if bad:
                raise UsageError(f"unknown config keys: {sorted(bad)}")
            argv_list = list(argv) if argv is not None else sys.argv[1:]
            merged = _merge_config(args, defaults, argv_list)
            return _run_command(merged)
        return _run_command(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SpaceError, DatasetError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (lvgp.FitError, lvgp.FactorizationError, gsa.ConstantResponseError,
            SamplingError, mobo.BoAbort, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _merge_config(args, defaults: dict, argv_list: list[str]):
    """Config-file values fill in wherever the flag was not given on the
    command line (flags override the file)."""
    given = set()
    for token in argv_list:
        if token.startswith("--"):
            given.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, raw in defaults.items():
        if key in given or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, raw.lower() in ("1", "true", "yes", "on"))
        elif isinstance(current, int):
            setattr(args, key, int(raw))
        elif isinstance(current, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)
    return args


if __name__ == "__main__":
    sys.exit(main())
