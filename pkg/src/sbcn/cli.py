"""Command-line surface: infer, simulate, experiment, bootstrap, lift, validate.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage or I/O
problems.  Every command takes --seed and produces byte-identical output
for identical inputs; SBCN_JOBS sets the default worker count for the
parallel commands.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from sbcn._version import __version__
from sbcn.data import (
    Dag,
    DataError,
    format_formula,
    lift_dataset,
    load_dataset,
    load_formulas,
    save_dataset,
)
from sbcn.document import (
    from_network,
    load_document,
    render_document,
    save_document,
    to_dot,
)
from sbcn.evaluate import ExperimentGrid, bootstrap_confidence, run_grid
from sbcn.generate import (
    KINDS,
    NoiseSpec,
    TopologyClass,
    apply_noise,
    make_xor_formulas,
    random_structure,
    sample_dataset,
    validate_structure,
)
from sbcn.scoring import REGULARIZERS, ScoreConfig, fit_cpts
from sbcn.search import SearchConfig, infer_sbcn
from sbcn.seeds import derive_seed
from sbcn.suppes import ConditionTestConfig, prima_facie

__all__ = ["main"]

_USAGE_ERRORS = (
    DataError,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
    PermissionError,
    ValueError,
    json.JSONDecodeError,
)


def _default_jobs() -> int:
    raw = os.environ.get("SBCN_JOBS", "")
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"SBCN_JOBS must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ValueError("SBCN_JOBS must be >= 1")
    return jobs


def _add_inference_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--reg",
        choices=REGULARIZERS,
        default="bic",
        help="likelihood regularizer (default: bic)",
    )
    parser.add_argument(
        "--pf-only",
        action="store_true",
        help="skip the search; keep every prima facie edge",
    )
    parser.add_argument(
        "--search",
        choices=("hill_climb", "exhaustive"),
        default="hill_climb",
        help="search strategy over the prima facie edges",
    )
    parser.add_argument("--max-parents", type=int, default=None)
    parser.add_argument("--pseudocount", type=float, default=0.0)
    parser.add_argument(
        "--condition-test",
        choices=("point_estimate", "bootstrap"),
        default="point_estimate",
        help="how the two prima facie inequalities are assessed",
    )
    parser.add_argument(
        "--condition-replicates",
        type=int,
        default=100,
        help="resamples for --condition-test bootstrap",
    )
    parser.add_argument(
        "--condition-level",
        type=float,
        default=0.95,
        help="support threshold for --condition-test bootstrap",
    )


def _inference_configs(args) -> "tuple[ConditionTestConfig, SearchConfig]":
    condition = ConditionTestConfig(
        mode=args.condition_test,
        replicates=args.condition_replicates,
        confidence_level=args.condition_level,
        seed=derive_seed(args.seed, "condition_test"),
    )
    search = SearchConfig(
        score=ScoreConfig(regularizer=args.reg, pseudocount=args.pseudocount),
        max_parents=args.max_parents,
        mode="prima_facie_only" if args.pf_only else args.search,
        seed=args.seed,
    )
    return condition, search


def _write_document(document, output: "str | None", dot: "str | None") -> None:
    if output:
        save_document(document, output)
    else:
        sys.stdout.write(render_document(document))
    if dot:
        Path(dot).write_text(to_dot(document), encoding="utf-8")


def _cmd_infer(args) -> int:
    dataset = load_dataset(args.dataset)
    condition, search = _inference_configs(args)
    scored = infer_sbcn(dataset, condition, search)
    document = from_network(
        scored.network,
        metadata={
            "regularizer": args.reg,
            "pseudocount": args.pseudocount,
            "seed": args.seed,
            "mode": search.mode,
            "condition_test": args.condition_test,
            "score": scored.score,
            "log_likelihood": scored.log_likelihood,
            "penalty": scored.penalty,
        },
    )
    _write_document(document, args.output, args.dot)
    return 0


def _cmd_simulate(args) -> int:
    topology = TopologyClass(kind=args.kind, node_count=args.nodes)
    model = random_structure(
        topology,
        derive_seed(args.seed, "structure"),
        activation=args.activation,
        spontaneous=args.spontaneous,
        source_marginal=args.source_marginal,
    )
    validate_structure(model, topology)
    clean = sample_dataset(model, args.samples, derive_seed(args.seed, "data"))
    noisy = apply_noise(
        clean,
        NoiseSpec(
            level=args.noise, seed=derive_seed(args.seed, "noise"), mode=args.noise_mode
        ),
    )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.csv"
    save_dataset(noisy, dataset_path)
    names = model.event_names
    edge_lines = [
        f"{names[parent]}\t{names[child]}\n"
        for parent, child in sorted(model.dag.edges)
    ]
    structure_path = out / "structure.txt"
    structure_path.write_text("".join(edge_lines), encoding="utf-8")
    sidecar = {
        "schema_version": 1,
        "kind": args.kind,
        "node_count": args.nodes,
        "sample_count": args.samples,
        "activation": args.activation,
        "spontaneous": args.spontaneous,
        "source_marginal": model.source_marginal,
        "noise": args.noise,
        "noise_mode": args.noise_mode,
        "seed": args.seed,
        "events": list(names),
        "edges": [[names[p], names[c]] for p, c in sorted(model.dag.edges)],
        "logic": {names[v]: model.logic[v] for v in range(model.dag.node_count)},
    }
    written = [dataset_path, structure_path]
    if model.xor_nodes():
        formulas = make_xor_formulas(model)
        formula_path = out / "formulas.txt"
        formula_path.write_text(
            "".join(format_formula(f, names) + "\n" for f in formulas),
            encoding="utf-8",
        )
        sidecar["formulas"] = [format_formula(f, names) for f in formulas]
        written.append(formula_path)
    sidecar_path = out / "model.json"
    sidecar_path.write_text(
        json.dumps(sidecar, indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )
    written.append(sidecar_path)
    for path in written:
        print(path)
    return 0


def _grid_from_config(args) -> ExperimentGrid:
    kwargs: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        if not isinstance(raw, dict):
            raise ValueError("grid config must be a JSON object")
        allowed = set(ExperimentGrid.__dataclass_fields__)
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown grid config keys: {sorted(unknown)}")
        for key, value in raw.items():
            kwargs[key] = tuple(value) if isinstance(value, list) else value
    if args.full_scale:
        kwargs.setdefault("structures_per_class", 100)
        kwargs.setdefault("repetitions", 10)
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    return ExperimentGrid(**kwargs)


def _cmd_experiment(args) -> int:
    grid = _grid_from_config(args)
    jobs = args.jobs if args.jobs is not None else _default_jobs()

    def progress(done: int, total: int, key: str) -> None:
        if not args.quiet:
            print(f"[{done}/{total}] {key}", file=sys.stderr)

    result = run_grid(grid, args.output_dir, jobs=jobs, progress=progress)
    print(f"results: {result.results_path}")
    print(f"aggregates: {result.aggregates_path}")
    print(f"errors: {result.errors_path} ({result.error_count} recorded)")
    print(
        f"rows: {result.row_count} over {result.cells_total} cells "
        f"({result.cells_computed} computed, {result.cells_reused} reused)"
    )
    return 0


def _cmd_bootstrap(args) -> int:
    dataset = load_dataset(args.dataset)
    condition, search = _inference_configs(args)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    scored = infer_sbcn(dataset, condition, search)
    confidence = bootstrap_confidence(
        dataset,
        condition,
        search,
        replicates=args.replicates,
        seed=args.seed,
        jobs=jobs,
    )
    document = from_network(
        scored.network,
        metadata={
            "regularizer": args.reg,
            "pseudocount": args.pseudocount,
            "seed": args.seed,
            "mode": search.mode,
            "condition_test": args.condition_test,
            "replicates": args.replicates,
            "score": scored.score,
            "log_likelihood": scored.log_likelihood,
            "penalty": scored.penalty,
        },
        confidence=confidence,
    )
    _write_document(document, args.output, args.dot)
    return 0


def _cmd_lift(args) -> int:
    dataset = load_dataset(args.dataset)
    formulas = load_formulas(args.formulas, dataset.event_names)
    if not formulas:
        raise ValueError(f"no formulas found in {args.formulas}")
    lifted = lift_dataset(dataset, formulas)
    delimiter = "\t" if args.delimiter == "tab" else ","
    save_dataset(lifted, args.output, delimiter=delimiter)
    print(args.output)
    return 0


def _cmd_validate(args) -> int:
    document = load_document(args.document)
    dataset = load_dataset(args.dataset)
    problems: list[str] = []
    if document.events != dataset.event_names:
        problems.append(
            "event names disagree: document "
            f"{list(document.events)} vs dataset {list(dataset.event_names)}"
        )
    else:
        allowed = prima_facie(dataset).allowed_edges
        names = document.events
        for parent, child in document.edge_index_pairs():
            if (parent, child) not in allowed:
                problems.append(
                    f"edge {names[parent]} -> {names[child]} fails the "
                    "prima facie conditions on this dataset"
                )
        if document.cpts:
            pseudocount = float(document.metadata.get("pseudocount", 0.0))
            dag = Dag(
                node_count=len(names),
                edges=frozenset(document.edge_index_pairs()),
            )
            refit = fit_cpts(dataset, dag, pseudocount=pseudocount)
            for entry, fresh in zip(document.cpts, refit):
                stored = np.asarray(entry.p_one, dtype=np.float64)
                if not np.allclose(stored, fresh.p_one, rtol=0.0, atol=args.tolerance):
                    problems.append(
                        f"probability table for {entry.event} does not match a "
                        f"refit on this dataset (pseudocount={pseudocount})"
                    )
    if problems:
        for problem in problems:
            print(f"violation: {problem}", file=sys.stderr)
        return 1
    print(f"ok: {args.document} is a valid network for {args.dataset}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbcn",
        description=(
            "Infer Suppes-Bayes causal networks from binary event data and "
            "benchmark the inference on simulated progression models."
        ),
    )
    parser.add_argument("--version", action="version", version=f"sbcn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="infer a network from a dataset")
    p.add_argument("dataset", help="delimited binary dataset path")
    p.add_argument("-o", "--output", default=None, help="document path (default: stdout)")
    p.add_argument("--dot", default=None, help="also write a dot-language export")
    _add_inference_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("simulate", help="sample a random progression model")
    p.add_argument("--class", dest="kind", required=True, choices=KINDS)
    p.add_argument("-n", "--nodes", type=int, required=True)
    p.add_argument("-m", "--samples", type=int, required=True)
    p.add_argument("--activation", type=float, default=0.9)
    p.add_argument("--spontaneous", type=float, default=0.05)
    p.add_argument("--source-marginal", type=float, default=None)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--noise-mode", choices=("coin", "flip"), default="coin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output-dir", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="run the benchmark grid")
    p.add_argument("-c", "--config", default=None, help="grid config JSON")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument(
        "-j",
        "--jobs",
        type=int,
        default=None,
        help="worker processes (default: SBCN_JOBS or 1)",
    )
    p.add_argument(
        "--full-scale",
        action="store_true",
        help="100 structures x 10 repetitions instead of the desk-scale 20 x 5",
    )
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("bootstrap", help="annotate an inferred network with edge confidence")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--dot", default=None)
    p.add_argument("--replicates", type=int, default=100)
    _add_inference_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-j", "--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_bootstrap)

    p = sub.add_parser("lift", help="append CNF formula columns to a dataset")
    p.add_argument("dataset")
    p.add_argument("formulas", help="one named formula per line: name = a & (b | !c)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--delimiter", choices=(",", "tab"), default=",")
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("validate", help="check a document against its source dataset")
    p.add_argument("document")
    p.add_argument("dataset")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"sbcn: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures keep the 1/2 distinction
        print(f"sbcn: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
