"""Command-line entry points: fit, simulate, permtest.

Every run writes a manifest.json holding the fully resolved arguments, the
tool version, and the wall-clock time; the numeric outputs of any command
can be regenerated bitwise from the manifest alone. Configuration may come
from a flat key=value file (--config); explicit flags win over the file.
"""

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import substream
from .evaluation import paired_t_test
from .exceptions import MvembedError
from .graph import (
    correlation_threshold_graph,
    default_neighbor_count,
    identity_graph,
    knn_graph,
    load_graph,
)
from .matio import RawMatrix, read_matrix, write_array
from .optimizer import FitConfig, FitResult, fit
from .preprocess import DataView, align_views, standardize
from .simulation import (
    METHOD_TAGS,
    HarnessConfig,
    StudySpec,
    corruption_sensitivity,
    fit_on_train,
    generate,
    permutation_baseline,
    recovery_score,
    run_study,
    spec_for_run,
)

CONFIG_HELP = (
    "flat key=value file; keys are long option names without the leading "
    "dashes (e.g. 'seed=3', 'views=a.tsv,b.tsv'); '#' starts a comment; "
    "explicit flags override file values"
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_table(path: Path, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _split_list(values) -> list[str]:
    out = []
    for item in values:
        out.extend(part for part in str(item).split(",") if part)
    return out


def _read_config_file(path: str) -> dict:
    entries = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MvembedError(f"config line without '=': {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _merge_args(parser: argparse.ArgumentParser, argv: list[str], defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    ns = parser.parse_args(argv)
    given = {k: v for k, v in vars(ns).items() if v is not argparse.SUPPRESS}
    merged = dict(defaults)
    if "config" in given:
        file_entries = _read_config_file(given.pop("config"))
        unknown = set(file_entries) - set(defaults)
        if unknown:
            raise MvembedError(f"unknown config keys: {sorted(unknown)}")
        for key, raw in file_entries.items():
            default = defaults[key]
            if isinstance(default, bool):
                merged[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(default, int) and not isinstance(default, bool):
                merged[key] = int(raw)
            elif isinstance(default, float):
                merged[key] = float(raw)
            elif isinstance(default, list):
                merged[key] = raw.split(",") if raw else []
            else:
                merged[key] = raw
    merged.update(given)
    return merged


def _manifest(out: Path, command: str, args: dict, started: float) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "wall_clock_s": round(time.time() - started, 3),
        "args": {k: v for k, v in args.items()},
    }
    (out / "manifest.json").write_text(json.dumps(payload, indent=2, default=str) + "\n")


def args_from_manifest(manifest_path) -> list[str]:
    """Rebuild an equivalent CLI invocation from a stored manifest."""
    payload = json.loads(Path(manifest_path).read_text())
    argv = [payload["command"]]
    for key, value in payload["args"].items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, list):
            if value:
                argv.extend([flag, ",".join(str(v) for v in value)])
        elif value is not None:
            argv.extend([flag, str(value)])
    return argv


# ---------------------------------------------------------------------------
# fit


FIT_DEFAULTS = {
    "views": [],
    "graphs": [],
    "graph_knn": 0,
    "graph_tau": 0.0,
    "k": 2,
    "similarity": "recon",
    "separation": "svd",
    "norm": "l0",
    "sparseness": ["0.5"],
    "max_iter": 100,
    "tol": 1e-6,
    "init": "joint_svd",
    "seed": 0,
    "out": "mvembed_fit",
}


def _fit_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvembed fit", argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help=CONFIG_HELP)
    p.add_argument("--views", action="append", help="input matrix paths (>=2, repeatable or comma-separated)")
    p.add_argument("--graphs", action="append", help="edge-list graph files, one per view")
    p.add_argument("--graph-knn", type=int, help="build knn graphs with this neighbor count (0=default count)")
    p.add_argument("--graph-tau", type=float, help="build correlation-threshold graphs at this tau")
    p.add_argument("--k", type=int, help="number of components")
    p.add_argument("--similarity", choices=["recon", "acc"])
    p.add_argument("--separation", choices=["svd", "ica"])
    p.add_argument("--norm", choices=["l0", "l1"])
    p.add_argument("--sparseness", action="append", help="per-view sparseness in [0,1) (repeatable)")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--init", choices=["joint_svd", "joint_ica", "random"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    return p


def _build_graph(flag_knn: int, flag_tau: float, graph_paths: list[str], index: int, x: np.ndarray):
    if graph_paths:
        return load_graph(graph_paths[index])
    if flag_tau > 0.0:
        return correlation_threshold_graph(x, flag_tau)
    if flag_knn > 0:
        return knn_graph(x, flag_knn)
    if flag_knn == 0:
        return identity_graph(x.shape[1])
    return knn_graph(x, default_neighbor_count(x.shape[1]))


def cmd_fit(argv: list[str]) -> int:
    started = time.time()
    args = _merge_args(_fit_parser(), argv, FIT_DEFAULTS)
    view_paths = _split_list(args["views"])
    if len(view_paths) < 2:
        raise MvembedError("--views needs at least 2 matrix paths")
    graph_paths = _split_list(args["graphs"])
    if graph_paths and len(graph_paths) != len(view_paths):
        raise MvembedError("--graphs needs exactly one file per view")
    gammas = [float(g) for g in _split_list(args["sparseness"])]
    if len(gammas) == 1:
        gammas = gammas * len(view_paths)
    if len(gammas) != len(view_paths):
        raise MvembedError("--sparseness needs one value (shared) or one per view")

    raws = align_views([read_matrix(p) for p in view_paths])
    n = raws[0].values.shape[0]
    if args["k"] > n - 1:
        raise MvembedError(f"--k {args['k']} exceeds n-1 = {n - 1}")

    views = []
    for i, raw in enumerate(raws):
        std = standardize(raw)
        g = _build_graph(args["graph_knn"], args["graph_tau"], graph_paths, i, std.x)
        views.append(
            DataView(std.x, g, gammas[i], name=Path(view_paths[i]).stem, row_ids=std.row_ids, col_ids=std.col_ids)
        )

    config = FitConfig(
        k=args["k"],
        similarity=args["similarity"],
        separation=args["separation"],
        norm=args["norm"],
        max_iterations=args["max_iter"],
        tolerance=args["tol"],
        initialization=args["init"],
        seed=args["seed"],
    )
    result = fit(views, config)

    out = Path(args["out"])
    out.mkdir(parents=True, exist_ok=True)
    comp_ids = [f"comp_{c}" for c in range(config.k)]
    for i, view in enumerate(views):
        write_array(result.vs[i], out / f"features_view{i}.tsv", view.col_ids, comp_ids)
        write_array(result.us[i], out / f"embedding_view{i}.tsv", view.row_ids, comp_ids)
    _write_trace(out / "trace.tsv", result, len(views))
    _write_energy(out / "energy.tsv", result)
    args["views"] = view_paths
    args["graphs"] = graph_paths
    args["sparseness"] = gammas
    _manifest(out, "fit", args, started)
    print(f"fit: {result.iterations} iterations, converged={result.converged}, out={out}")
    return 0


def _write_trace(path: Path, result: FitResult, m: int) -> None:
    header = (
        ["iteration"]
        + [f"similarity_view{i}" for i in range(m)]
        + [f"regularization_view{i}" for i in range(m)]
        + ["total"]
        + [f"accepted_view{i}" for i in range(m)]
    )
    rows = [[0, *result.initial_energy.per_view_similarity, *result.initial_energy.regularization,
             result.initial_energy.total, *([0] * m)]]
    for entry in result.trace:
        rows.append(
            [entry.iteration, *entry.report.per_view_similarity, *entry.report.regularization,
             entry.report.total, *(int(a) for a in entry.accepted)]
        )
    _write_table(path, header, rows)


def _write_energy(path: Path, result: FitResult) -> None:
    report = result.final_energy
    rows = [[i, s, r] for i, (s, r) in enumerate(zip(report.per_view_similarity, report.regularization))]
    rows.append(["TOTAL", sum(report.per_view_similarity), sum(report.regularization)])
    _write_table(path, ["view", "similarity", "regularization"], rows)


# ---------------------------------------------------------------------------
# simulate


SIMULATE_DEFAULTS = {
    "runs": 30,
    "n": 100,
    "p": ["300", "400", "500"],
    "k_range": ["3", "6"],
    "n_latent_eval": 1,
    "smoothing_range": ["0.02", "0.08"],
    "corruption": "uniform-random",
    "train_fraction": 0.8,
    "methods": list(METHOD_TAGS),
    "fit_k": 0,
    "sparseness_value": 0.5,
    "graph": "knn",
    "graph_knn": 0,
    "max_iter": 50,
    "tol": 1e-6,
    "init": "joint_svd",
    "permutations": 0,
    "perm_runs": 5,
    "jobs": 1,
    "seed": 0,
    "out": "mvembed_sim",
}


def _simulate_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvembed simulate", argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help=CONFIG_HELP)
    p.add_argument("--runs", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--p", action="append", help="predictor counts per view, comma-separated")
    p.add_argument("--k-range", action="append", help="inclusive range for the generating rank, e.g. 3,6")
    p.add_argument("--n-latent-eval", type=int, choices=[1, 2])
    p.add_argument("--smoothing-range", action="append", help="range for per-view smoothing widths")
    p.add_argument("--corruption", help="'uniform-random' or per-view fractions like 0.3,0.5,0.2")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--methods", action="append", help=f"subset of {','.join(METHOD_TAGS)}")
    p.add_argument("--fit-k", type=int, help="solver rank (0 = the run's generating rank)")
    p.add_argument("--sparseness-value", type=float)
    p.add_argument("--graph", choices=["knn", "identity"])
    p.add_argument("--graph-knn", type=int, help="knn neighbor count (0 = default count)")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--init", choices=["joint_svd", "joint_ica", "random"])
    p.add_argument("--permutations", type=int, help="null refits per permuted run")
    p.add_argument("--perm-runs", type=int, help="how many runs get a permutation null")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    return p


def cmd_simulate(argv: list[str]) -> int:
    started = time.time()
    args = _merge_args(_simulate_parser(), argv, SIMULATE_DEFAULTS)
    p_counts = tuple(int(v) for v in _split_list(args["p"]))
    k_lo, k_hi = (int(v) for v in _split_list(args["k_range"]))
    s_lo, s_hi = (float(v) for v in _split_list(args["smoothing_range"]))
    methods = _split_list(args["methods"])
    for tag in methods:
        if tag not in METHOD_TAGS:
            raise MvembedError(f"--methods: unknown tag {tag!r}, choose from {METHOD_TAGS}")
    corruption = args["corruption"]
    if corruption != "uniform-random":
        corruption = tuple(float(v) for v in corruption.split(","))

    study = StudySpec(
        runs=args["runs"],
        n=args["n"],
        p=p_counts,
        k_range=(k_lo, k_hi),
        n_latent_eval=args["n_latent_eval"],
        smoothing_range=(s_lo, s_hi),
        corruption=corruption,
        train_fraction=args["train_fraction"],
        seed=args["seed"],
    )
    harness = HarnessConfig(
        k=args["fit_k"] or None,
        sparseness=args["sparseness_value"],
        graph=args["graph"],
        graph_k=args["graph_knn"] or None,
        max_iterations=args["max_iter"],
        tolerance=args["tol"],
        initialization=args["init"],
    )
    records = run_study(study, methods, harness, jobs=args["jobs"])

    out = Path(args["out"])
    out.mkdir(parents=True, exist_ok=True)
    m = len(p_counts)
    n_eval = study.n_latent_eval
    header = (
        ["run", "seed", "n"]
        + [f"p_{j}" for j in range(m)]
        + ["k_true"]
        + [f"frac_{j}" for j in range(m)]
        + ["method"]
        + [f"train_r2_{t}" for t in range(n_eval)]
        + [f"test_r2_{t}" for t in range(n_eval)]
    )
    rows = [
        [rec.run, rec.seed, rec.n, *rec.p, rec.k_true, *rec.fractions, rec.method,
         *rec.train_r2, *rec.test_r2]
        for rec in records
    ]
    _write_table(out / "summary.tsv", header, rows)
    _write_table(
        out / "timings.tsv",
        ["run", "method", "runtime_s"],
        [[rec.run, rec.method, rec.runtime_s] for rec in records],
    )

    by_method = {tag: [r for r in records if r.method == tag] for tag in methods}
    comp_rows = []
    for i, tag_a in enumerate(methods):
        for tag_b in methods[i + 1 :]:
            report = paired_t_test(
                [r.test_r2[0] for r in by_method[tag_a]],
                [r.test_r2[0] for r in by_method[tag_b]],
            )
            comp_rows.append([tag_a, tag_b, report.mean_diff, report.t_statistic, report.p_value, report.dof])
    if comp_rows:
        _write_table(
            out / "comparisons.tsv",
            ["method_a", "method_b", "mean_diff", "t_statistic", "p_value", "dof"],
            comp_rows,
        )

    sens_rows = []
    for tag in methods:
        recs = by_method[tag]
        sens = corruption_sensitivity([r.test_r2[0] for r in recs], [r.fractions for r in recs])
        sens_rows.append([tag, sens.p_value, sens.f_statistic, *sens.coefficients, sens.intercept])
    pooled = corruption_sensitivity(
        [r.test_r2[0] for r in records], [r.fractions for r in records]
    )
    sens_rows.append(["pooled", pooled.p_value, pooled.f_statistic, *pooled.coefficients, pooled.intercept])
    _write_table(
        out / "sensitivity.tsv",
        ["method", "p_value", "f_statistic"] + [f"coef_{j}" for j in range(m)] + ["intercept"],
        sens_rows,
    )

    if args["permutations"] > 0:
        perm_rows = []
        for run in range(min(args["perm_runs"], study.runs)):
            data = generate(spec_for_run(study, run))
            for tag in methods:
                similarity, separation = tag.split("-")
                hc = replace(harness, similarity=similarity, separation=separation)
                observed = next(
                    r.test_r2[0] for r in records if r.run == run and r.method == tag
                )
                nulls = permutation_baseline(data, hc, args["permutations"])
                perm_rows.append(
                    [run, tag, observed, float(np.mean(nulls)), float(np.max(nulls)),
                     len(nulls), int(observed > max(nulls))]
                )
        _write_table(
            out / "permnull.tsv",
            ["run", "method", "observed_r2", "null_mean", "null_max", "n_perms", "exceeds_null"],
            perm_rows,
        )

    args["p"] = list(p_counts)
    args["k_range"] = [k_lo, k_hi]
    args["smoothing_range"] = [s_lo, s_hi]
    args["methods"] = methods
    _manifest(out, "simulate", args, started)
    for tag in methods:
        mean_r2 = float(np.mean([r.test_r2[0] for r in by_method[tag]]))
        print(f"simulate: {tag} mean test R^2 = {mean_r2:.4f} over {study.runs} runs")
    return 0


# ---------------------------------------------------------------------------
# permtest


PERMTEST_DEFAULTS = {
    "fit_dir": "",
    "permutations": 0,
    "seed": -1,
    "out": "mvembed_permtest",
}


def _permtest_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvembed permtest", argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help=CONFIG_HELP)
    p.add_argument("--fit-dir", help="output directory of a previous 'fit' run")
    p.add_argument("--permutations", type=int)
    p.add_argument("--seed", type=int, help="permutation stream seed (default: the fit's seed)")
    p.add_argument("--out")
    return p


def cmd_permtest(argv: list[str]) -> int:
    started = time.time()
    args = _merge_args(_permtest_parser(), argv, PERMTEST_DEFAULTS)
    if args["permutations"] < 1:
        raise MvembedError("--permutations must be at least 1")
    if not args["fit_dir"]:
        raise MvembedError("--fit-dir is required")
    fit_manifest = json.loads((Path(args["fit_dir"]) / "manifest.json").read_text())
    if fit_manifest["command"] != "fit":
        raise MvembedError("--fit-dir does not contain a fit manifest")
    fargs = fit_manifest["args"]

    observed = _read_energy_similarity(Path(args["fit_dir"]) / "energy.tsv")
    seed = args["seed"] if args["seed"] >= 0 else int(fargs["seed"])

    raws = align_views([read_matrix(p) for p in fargs["views"]])
    nulls = []
    for idx in range(args["permutations"]):
        rng = substream(seed, "perm", idx)
        permuted = []
        for raw in raws:
            perm = rng.permutation(raw.values.shape[0])
            permuted.append(RawMatrix(raw.values[perm], list(raw.row_ids), list(raw.col_ids)))
        views = []
        for i, raw in enumerate(permuted):
            std = standardize(raw)
            g = _build_graph(int(fargs["graph_knn"]), float(fargs["graph_tau"]),
                             fargs["graphs"], i, std.x)
            views.append(DataView(std.x, g, float(fargs["sparseness"][i]), name=f"perm{i}"))
        config = FitConfig(
            k=int(fargs["k"]),
            similarity=fargs["similarity"],
            separation=fargs["separation"],
            norm=fargs["norm"],
            max_iterations=int(fargs["max_iter"]),
            tolerance=float(fargs["tol"]),
            initialization=fargs["init"],
            seed=int(fargs["seed"]),
        )
        nulls.append(fit(views, config).final_similarity)

    n_leq = sum(1 for v in nulls if v <= observed)
    p_value = (1 + n_leq) / (args["permutations"] + 1)

    out = Path(args["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "null_energies.tsv", ["perm", "similarity_energy"],
                 [[i, v] for i, v in enumerate(nulls)])
    _write_table(out / "result.tsv",
                 ["observed_similarity", "n_perms", "n_null_leq_observed", "p_value"],
                 [[observed, args["permutations"], n_leq, p_value]])
    _manifest(out, "permtest", args, started)
    print(f"permtest: observed={observed:.6g}, empirical p={p_value:.4f}")
    return 0


def _read_energy_similarity(path: Path) -> float:
    for line in path.read_text().splitlines():
        parts = line.split("\t")
        if parts[0] == "TOTAL":
            return float(parts[1])
    raise MvembedError(f"{path}: no TOTAL row")


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    commands = {"fit": cmd_fit, "simulate": cmd_simulate, "permtest": cmd_permtest}
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: mvembed {fit,simulate,permtest} [options]   (--help per command)")
        return 0 if argv else 2
    command = argv[0]
    if command not in commands:
        print(f"error: unknown command {command!r}; choose from {sorted(commands)}", file=sys.stderr)
        return 2
    try:
        return commands[command](argv[1:])
    except MvembedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
