"""
graphdream command line - verify rules, train the world model and controller, optimize graphs
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from graphdream.agents.orchestrator import PipelineOrchestrator, PipelineResult, PipelineType
from graphdream.config.settings import load_config
from graphdream.exceptions import CheckpointError, ConfigError, DivergenceDetected, GraphDreamError, InvalidSpec
from graphdream.utils.logging import get_logger, setup_logging
from graphdream.zoo.builders import ZOO_NAMES

logger = get_logger("graphdream")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3

METHODS = ("rl", "greedy", "backtracking", "random")


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("temperatures must be positive")
    return values


def positive_float(text: str) -> float:
    values = float_list(text)
    if len(values) != 1:
        raise argparse.ArgumentTypeError(f"expected one temperature, got {text!r}")
    return values[0]


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("runs"), help="output directory")

    graph = CliParser(add_help=False)
    graph.add_argument("--graph", required=True, help=f"zoo name ({', '.join(ZOO_NAMES)}) or graph file")

    models = CliParser(add_help=False)
    models.add_argument("--wm", type=Path, help="world-model checkpoint")
    models.add_argument("--controller", type=Path,
                        help="controller checkpoint; runs with --wm or the world_model.pt beside it")

    parser = CliParser(prog="graphdream", description=__doc__.strip())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("verify-rules", parents=[common], help="check every rule with the equivalence oracle")
    p.add_argument("--library", type=Path, help="rule library (default: shipped library)")
    p.add_argument("--trials", type=positive_int, help="random trials per rule")

    sub.add_parser("train-wm", parents=[common, graph], help="train the world model on random rollouts")

    p = sub.add_parser("train-controller", parents=[common, graph, models], help="train the controller in the dream")
    p.add_argument("--tau", type=positive_float, help="sampling temperature")

    p = sub.add_parser("optimize", parents=[common, graph, models], help="optimize a graph with one method")
    p.add_argument("--method", choices=METHODS, default="rl")
    p.add_argument("--episodes", type=positive_int, help="evaluation episodes")

    p = sub.add_parser("sweep-temperature", parents=[common, graph, models], help="dream-train across temperatures")
    p.add_argument("--tau", type=float_list, help="comma-separated temperatures")

    p = sub.add_parser("bench-step-time", parents=[common, graph, models], help="time real and dream steps")
    p.add_argument("--steps", type=positive_int, help="steps per environment")

    p = sub.add_parser("export-graph", parents=[common, graph], help="write a zoo graph to a graph file")
    p.add_argument("--path", type=Path, help="target file (default: <out>/<name>.json)")

    p = sub.add_parser("compare-rewards", parents=[common, graph], help="model-free PPO per reward preset")
    p.add_argument("--epochs", type=positive_int, help="PPO updates per preset")

    p = sub.add_parser("xfer-heatmap", parents=[common], help="rule application counts over the zoo")
    p.add_argument("--method", choices=METHODS, default="greedy")

    sub.add_parser("sample-efficiency", parents=[common, graph], help="model-based vs model-free interactions")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.command == "verify-rules" and args.trials is not None:
        overrides["rules"] = {"trials": args.trials}
    return overrides


def dispatch(orchestrator: PipelineOrchestrator, args: argparse.Namespace) -> PipelineResult:
    command = PipelineType(args.command)
    if command == PipelineType.VERIFY_RULES:
        return orchestrator.execute(command, library=args.library, trials=args.trials)
    if command == PipelineType.TRAIN_WM:
        return orchestrator.execute(command, graph=args.graph)
    if command == PipelineType.TRAIN_CONTROLLER:
        return orchestrator.execute(command, graph=args.graph, wm_path=args.wm,
                                    tau=args.tau)
    if command == PipelineType.OPTIMIZE:
        return orchestrator.execute(command, graph=args.graph, method=args.method, wm_path=args.wm,
                                    controller_path=args.controller, episodes=args.episodes)
    if command == PipelineType.SWEEP_TEMPERATURE:
        return orchestrator.execute(command, graph=args.graph, taus=args.tau, wm_path=args.wm)
    if command == PipelineType.BENCH_STEP_TIME:
        return orchestrator.execute(command, graph=args.graph, wm_path=args.wm, steps=args.steps)
    if command == PipelineType.EXPORT_GRAPH:
        return orchestrator.execute(command, graph=args.graph, path=args.path)
    if command == PipelineType.COMPARE_REWARDS:
        return orchestrator.execute(command, graph=args.graph, epochs=args.epochs)
    if command == PipelineType.XFER_HEATMAP:
        return orchestrator.execute(command, method=args.method)
    return orchestrator.execute(command, graph=args.graph)


def exit_code_for(error: BaseException) -> int:
    """1 for usage and configuration problems, 2 for validation failures, 3 for divergence"""
    if isinstance(error, DivergenceDetected):
        return EXIT_DIVERGENCE
    if isinstance(error, (FileNotFoundError, ConfigError, ValueError, InvalidSpec, CheckpointError)):
        return EXIT_USAGE
    return EXIT_VALIDATION


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides(args))
    except (FileNotFoundError, ConfigError) as e:
        print(f"graphdream: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(config.logging.level, config.logging.format)

    orchestrator = PipelineOrchestrator(config, args.out)
    try:
        result = dispatch(orchestrator, args)
    except FileNotFoundError as e:
        print(f"graphdream: FileNotFound: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        if not isinstance(e, (GraphDreamError, ValueError)):
            raise
        logger.error("Command failed", command=args.command, error_type=type(e).__name__, error=str(e))
        print(f"graphdream: {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)

    print(json.dumps(result.summary, indent=2, sort_keys=True, default=str))
    for message in result.errors:
        print(f"graphdream: {message}", file=sys.stderr)
    return EXIT_OK if result.success else EXIT_VALIDATION


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
