"""Command-line interface.

Five commands: run (agent-driven training), baseline (rdg or erg), trace
(print per-node formulas of a stored graph), export (re-emit a stored
graph as DOT, JSON, or transformed CSV), and evaluate (recompute final
metrics from a stored graph).  Run directories default under the
FEATGRAPH_RUNS root (or ./runs) and contain everything evaluate and
export need later.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from typing import Optional

import numpy as np

from .config import PipelineConfig, parse_config
from .controller import (
    RunResult,
    evaluate_final,
    run_baseline_erg,
    run_baseline_rdg,
    run_training,
)
from .errors import CorruptProgram, FeatGraphError
from .graph import replay_program, to_dot, to_program
from .metrics import make_evaluator, score
from .tabular import Dataset, SplitSpec, Task, load_csv, split

RUNS_ENV = "FEATGRAPH_RUNS"


def _load_dataset(args) -> Dataset:
    return load_csv(args.data, args.label, Task(args.task))


def _runs_root() -> str:
    return os.environ.get(RUNS_ENV, "runs")


def _program_dot(program: dict) -> str:
    """DOT text straight from a stored program (no graph object needed)."""
    lines = ["digraph fstgraph {", "  rankdir=LR;"]
    for rid, name in zip(program["root_ids"], program["roots"]):
        lines.append(f'  n{rid} [shape=box, label="{name}"];')
    for entry in program["nodes"]:
        lines.append(f'  n{entry["id"]} [shape=ellipse, label="{entry["op"]}#{entry["id"]}"];')
        for parent in entry["parents"]:
            lines.append(f'  n{parent} -> n{entry["id"]} [label="{entry["op"]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _write_matrix_csv(path: str, header: list[str], matrix: np.ndarray, labels: np.ndarray, label_name: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header + [label_name])
        for row, label in zip(matrix, labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


def write_run_dir(result: RunResult, out_dir: str) -> str:
    """Materialize a run's artifacts under out_dir; returns the report path."""
    os.makedirs(out_dir, exist_ok=True)
    names = result.report["artifacts"]
    program = to_program(result.best_graph)
    with open(os.path.join(out_dir, names["graph"]), "w", encoding="utf-8") as fh:
        json.dump(program, fh, indent=1, sort_keys=True)
    with open(os.path.join(out_dir, names["dot"]), "w", encoding="utf-8") as fh:
        fh.write(to_dot(result.best_graph))

    from .graph import materialize

    header = [result.best_graph.nodes[i].formula for i in result.best_graph.node_ids()]
    for key, data in (("train_csv", result.train), ("test_csv", result.test)):
        matrix = materialize(result.best_graph, data)
        _write_matrix_csv(
            os.path.join(out_dir, names[key]), header, matrix, data.labels, data.label_name
        )

    if result.checkpoints is not None and names["checkpoints"]:
        np.savez(os.path.join(out_dir, names["checkpoints"]), **result.checkpoints)

    report_path = os.path.join(out_dir, names["report"])
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(result.report, fh, indent=1, sort_keys=True)
    return report_path


def _default_out(prefix: str) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    return os.path.join(_runs_root(), f"{prefix}-{stamp}")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--label", required=True, help="name of the label column")
    p.add_argument(
        "--task", required=True, choices=[t.value for t in Task], help="prediction task"
    )


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="config override, repeatable",
    )


def _load_program(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            program = json.load(fh)
    except OSError as exc:
        raise CorruptProgram(f"cannot read graph file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CorruptProgram(f"graph file {path} is not valid JSON: {exc}") from None
    if not isinstance(program, dict):
        raise CorruptProgram(f"graph file {path} must hold a JSON object")
    return program


def _cmd_run(args) -> int:
    config = parse_config(args.config, args.overrides)
    dataset = _load_dataset(args)
    result = run_training(config, dataset)
    out_dir = args.out or _default_out("run")
    report_path = write_run_dir(result, out_dir)
    summary = result.report["summary"]
    print(f"report written to {report_path}")
    print(
        f"train CV: raw {summary['train_cv_raw']:.4f} -> best {summary['train_cv_best']:.4f}"
    )
    print(
        f"held-out: raw {summary['test_metric_raw']:.4f} -> best graph "
        f"{summary['test_metric_best_graph']:.4f}"
    )
    return 0


def _cmd_baseline(args) -> int:
    config = parse_config(args.config, args.overrides)
    dataset = _load_dataset(args)
    runner = run_baseline_rdg if args.kind == "rdg" else run_baseline_erg
    result = runner(config, dataset)
    out_dir = args.out or _default_out(f"baseline-{args.kind}")
    report_path = write_run_dir(result, out_dir)
    summary = result.report["summary"]
    print(f"report written to {report_path}")
    print(
        f"held-out: raw {summary['test_metric_raw']:.4f} -> best graph "
        f"{summary['test_metric_best_graph']:.4f}"
    )
    return 0


def _cmd_trace(args) -> int:
    program = _load_program(args.graph)
    for name in program["roots"]:
        print(name)
    for entry in sorted(program["nodes"], key=lambda e: int(e["id"])):
        print(entry["formula"])
    return 0


def _cmd_export(args) -> int:
    program = _load_program(args.graph)
    if args.format == "json":
        text = json.dumps(program, indent=1, sort_keys=True)
    elif args.format == "dot":
        text = _program_dot(program)
    else:  # csv: replay on a dataset
        if not (args.data and args.label and args.task):
            print("export --format csv needs --data/--label/--task", file=sys.stderr)
            return 2
        dataset = _load_dataset(args)
        matrix, order = replay_program(program, dataset)
        formulas = {int(e["id"]): e["formula"] for e in program["nodes"]}
        for rid, name in zip(program["root_ids"], program["roots"]):
            formulas[int(rid)] = name
        import io

        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([formulas[i] for i in order] + [dataset.label_name])
        for row, label in zip(matrix, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])
        text = buf.getvalue()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"written to {args.output}")
    else:
        print(text, end="" if text.endswith("\n") else "\n")
    return 0


def _cmd_evaluate(args) -> int:
    config = parse_config(args.config, args.overrides)
    program = _load_program(args.graph)
    dataset = _load_dataset(args)
    train, test = split(dataset, SplitSpec(config.train_fraction, config.seed))
    x_train, _ = replay_program(program, train)
    x_test, _ = replay_program(program, test)
    model = make_evaluator(config.evaluator, train.task, config, config.seed)
    model.fit(x_train, train.labels)
    raw_model = make_evaluator(config.evaluator, train.task, config, config.seed)
    raw_model.fit(train.features, train.labels)
    out = {
        "test_metric_best_graph": score(
            test.task, test.labels, model.predict(x_test), config.metric_averaging
        ),
        "test_metric_raw": score(
            test.task,
            test.labels,
            raw_model.predict(test.features),
            config.metric_averaging,
        ),
        "columns": x_test.shape[1],
    }
    print(json.dumps(out, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featgraph",
        description="feature construction by reinforcement-guided graph search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train the agents and emit a run directory")
    _add_data_args(p_run)
    _add_config_args(p_run)
    p_run.add_argument("--out", default=None, help="run directory (default under runs/)")
    p_run.set_defaults(func=_cmd_run)

    p_base = sub.add_parser("baseline", help="random or expand-reduce baseline run")
    p_base.add_argument("--kind", required=True, choices=["rdg", "erg"])
    _add_data_args(p_base)
    _add_config_args(p_base)
    p_base.add_argument("--out", default=None)
    p_base.set_defaults(func=_cmd_baseline)

    p_trace = sub.add_parser("trace", help="print per-node formulas of a stored graph")
    p_trace.add_argument("--graph", required=True, help="graph.json from a run directory")
    p_trace.set_defaults(func=_cmd_trace)

    p_export = sub.add_parser("export", help="re-emit a stored graph")
    p_export.add_argument("--graph", required=True)
    p_export.add_argument("--format", required=True, choices=["dot", "json", "csv"])
    p_export.add_argument("--data", default=None)
    p_export.add_argument("--label", default=None)
    p_export.add_argument("--task", default=None, choices=[t.value for t in Task])
    p_export.add_argument("--output", default=None, help="write here instead of stdout")
    p_export.set_defaults(func=_cmd_export)

    p_eval = sub.add_parser("evaluate", help="recompute final metrics from a stored graph")
    p_eval.add_argument("--graph", required=True)
    _add_data_args(p_eval)
    _add_config_args(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FeatGraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
