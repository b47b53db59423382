"""Command-line interface.

Subcommands: certify, counterexample, sweep, collective, train, oracle.
Exit codes: 0 success, 1 usage error, 2 data error, 3 oracle infeasible.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
import time
from typing import IO, Iterator

import numpy as np

from . import fileio
from .certify import certify_sound, find_counterexamples
from .collective import compute_robust_limits
from .errors import DataError, OracleInfeasibleError
from .graph import GcnModel, Graph
from .intervals import interval_certify
from .metrics import RobustnessSweep
from .perturbation import PerturbationBudget, exact_robust_nodes
from .training import RobustLossConfig, train_robust

METHODS = ("poly-topk", "poly-max", "interval-topk", "interval-max")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, with usage text
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _split_method(method: str) -> tuple[str, str]:
    family, variant = method.split("-", 1)
    return family, variant


@contextlib.contextmanager
def _open_output(path: str | None) -> Iterator[IO[str]]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            yield f


def _load_inputs(args) -> tuple[Graph, GcnModel]:
    return fileio.load_graph(args.graph), fileio.load_model(args.model)


def _budget(args) -> PerturbationBudget:
    return PerturbationBudget(per_node=args.local, total=args.global_budget)


def cmd_certify(args) -> int:
    graph, model = _load_inputs(args)
    budget = _budget(args)
    family, variant = _split_method(args.method)
    with _open_output(args.output) as out:
        if family == "interval":
            fileio.write_interval_certify_csv(out, interval_certify(model, graph, budget, variant))
        else:
            judgments = certify_sound(
                model, graph, budget, variant, mode=args.mode, threads=args.threads
            )
            counterexamples = find_counterexamples(model, graph, budget, judgments, args.threads)
            fileio.write_certify_csv(out, judgments, counterexamples)
    return 0


def cmd_counterexample(args) -> int:
    graph, model = _load_inputs(args)
    budget = _budget(args)
    family, variant = _split_method(args.method)
    if family != "poly":
        raise _UsageError(
            "counterexample: interval methods cannot produce counterexamples; use a poly method"
        )
    judgments = certify_sound(model, graph, budget, variant, mode=args.mode, threads=args.threads)
    counterexamples = find_counterexamples(model, graph, budget, judgments, args.threads)
    with _open_output(args.output) as out:
        fileio.write_counterexample_csv(out, counterexamples.values())
    return 0


def _parse_range(spec: str) -> range:
    try:
        lo, hi = spec.split(":")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise _UsageError(f"sweep: --global-range expects LO:HI, got {spec!r}")
    if lo < 0 or hi < lo:
        raise _UsageError(f"sweep: invalid range {spec!r}")
    return range(lo, hi + 1)


def cmd_sweep(args) -> int:
    graph, model = _load_inputs(args)
    family, variant = _split_method(args.method)
    budgets = _parse_range(args.global_range)
    lower, upper, runtime = [], [], []
    broken: set[int] = set()  # a counterexample stays valid at every larger budget
    for total in budgets:
        budget = PerturbationBudget(per_node=args.local, total=total)
        start = time.perf_counter()
        if family == "interval":
            margins = interval_certify(model, graph, budget, variant)
            lower.append(float((margins > 0).sum()) / graph.num_nodes)
            upper.append(1.0)
        else:
            judgments = certify_sound(
                model, graph, budget, variant, mode=args.mode, threads=args.threads
            )
            lower.append(sum(j.certified for j in judgments) / graph.num_nodes)
            fresh = [j for j in judgments if not j.certified and j.node not in broken]
            broken.update(find_counterexamples(model, graph, budget, fresh, args.threads))
            upper.append(1.0 - len(broken) / graph.num_nodes)
        runtime.append((time.perf_counter() - start) * 1000.0)
    sweep = RobustnessSweep(
        local_budget=args.local,
        global_budgets=tuple(budgets),
        lower=np.array(lower),
        upper=np.array(upper),
        runtime_ms=np.array(runtime),
    )
    with _open_output(args.output) as out:
        fileio.write_sweep_csv(out, sweep)
    return 0


def cmd_collective(args) -> int:
    graph, model = _load_inputs(args)
    family, variant = _split_method(args.method)
    limits = compute_robust_limits(
        model, graph, args.local,
        cap=args.cap, variant=variant, family=family, mode=args.mode, threads=args.threads,
    )
    capped = np.nonzero(~limits.never_certified & (limits.limits == limits.search_cap))[0]
    if len(capped):
        print(
            f"note: nodes {capped.tolist()} are still certified at the search cap; "
            f"their true limit is >= {limits.search_cap}",
            file=sys.stderr,
        )
    with _open_output(args.output) as out:
        fileio.write_collective_csv(out, limits)
    return 0


def _load_labels(path: str, num_nodes: int) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not (isinstance(data, list) and len(data) == num_nodes and all(isinstance(v, int) for v in data)):
        raise DataError(f"{path}: labels must be a list of {num_nodes} integers (-1 = unlabeled)")
    return np.array(data, dtype=np.int64)


def cmd_train(args) -> int:
    graph, model = _load_inputs(args)
    budget = _budget(args)
    family, variant = _split_method(args.method)
    if family != "poly":
        raise _UsageError("train: robust training needs a poly method for its margins")
    labels = _load_labels(args.labels, graph.num_nodes)
    config = RobustLossConfig(kind=args.loss)
    trained = train_robust(
        model, graph, labels, budget, config,
        steps=args.steps, learning_rate=args.lr, seed=args.seed,
        variant=variant, mode=args.mode, batch_size=args.batch_size,
        progress=(lambda step, loss: print(f"step {step}: loss {loss:.6f}", file=sys.stderr))
        if args.verbose
        else None,
    )
    if args.output is None:
        raise _UsageError("train: --output is required (checkpoint destination)")
    fileio.save_model(trained, args.output)
    return 0


def cmd_oracle(args) -> int:
    graph, model = _load_inputs(args)
    budget = _budget(args)
    robust = exact_robust_nodes(model, graph, budget, cap=args.cap)
    with _open_output(args.output) as out:
        fileio.write_oracle_csv(out, robust)
    return 0


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--graph", required=True, help="graph JSON file")
    common.add_argument("--model", required=True, help="model JSON file")
    common.add_argument("--local", type=int, default=1, help="max flips per node")
    common.add_argument("--global", dest="global_budget", type=int, default=1,
                        help="max flips overall")
    common.add_argument("--method", choices=METHODS, default="poly-topk")
    common.add_argument("--mode", choices=("both", "add-only", "delete-only"), default="both",
                        help="restrict flips to feature additions or deletions")
    common.add_argument("--output", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)

    parser = _Parser(prog="gcncert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", parents=[common], help="sound margins plus counterexamples")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("counterexample", parents=[common], help="verified counterexamples only")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("sweep", parents=[common], help="lower/upper ratios over a budget range")
    p.add_argument("--global-range", required=True, metavar="LO:HI")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("collective", parents=[common], help="maximum robust limit per node")
    p.add_argument("--cap", type=int, default=100, help="largest budget to search")
    p.set_defaults(func=cmd_collective)

    p = sub.add_parser("train", parents=[common], help="robust training, writes a checkpoint")
    p.add_argument("--labels", required=True, help="JSON list of labels, -1 = unlabeled")
    p.add_argument("--loss", choices=("hinge", "bce"), default="hinge")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("oracle", parents=[common], help="exhaustive exact robustness")
    p.add_argument("--cap", type=int, default=None, help="candidate cap override")
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OracleInfeasibleError as exc:
        print(f"gcncert: oracle infeasible: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"gcncert: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
