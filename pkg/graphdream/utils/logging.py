"""
Logging Utility - Structured logging setup
"""

import logging
import sys
from typing import Any, Dict, Optional

import structlog


_CONFIGURED = False


def setup_logging(level: str = "INFO", fmt: str = "json") -> None:
    """
    Configure structlog and the stdlib root logger.

    Only the CLI entry point calls this; library modules just ask for a logger.
    """
    global _CONFIGURED

    log_level = getattr(logging, level.upper(), logging.INFO)
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=log_level, force=True)

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if fmt == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=False,
    )
    _CONFIGURED = True

    get_logger(__name__).debug("logging_configured", level=level, format=fmt)


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Get a structured logger bound to a module name
    """
    return structlog.get_logger(name)


def log_command(command: str, phase: str, **details: Any) -> None:
    """
    Log CLI command lifecycle (start / finish / failure)
    """
    logger = get_logger("command")
    level = "error" if phase == "failed" else "info"
    getattr(logger, level)("command", command=command, phase=phase, **details)


def log_episode(source: str, episode: int, steps: int, episode_return: float,
                final_cost: Optional[float] = None, rt0: Optional[float] = None) -> None:
    """
    Log one finished episode (real, dream, or search). With the graph's initial
    runtime `rt0` the return is also logged as a fraction of it, comparable across graphs.
    """
    logger = get_logger("episode")
    return_norm = episode_return / rt0 if rt0 else None
    logger.debug("episode_finished",
                 source=source,
                 episode=episode,
                 steps=steps,
                 episode_return=episode_return,
                 return_norm=return_norm,
                 final_cost=final_cost)


def log_training_epoch(model: str, epoch: int, metrics: Dict[str, float]) -> None:
    """
    Log per-epoch training metrics
    """
    logger = get_logger("training")
    logger.info("epoch", model=model, epoch=epoch, **metrics)


def log_rule_verification(rule: str, verified: bool, trials: int, reason: Optional[str] = None) -> None:
    """
    Log the outcome of an equivalence check on a rule
    """
    logger = get_logger("rules")
    level = "info" if verified else "warning"
    getattr(logger, level)("rule_verification",
                           rule=rule,
                           verified=verified,
                           trials=trials,
                           reason=reason)


def log_search_result(method: str, graph: str, initial_cost: float, final_cost: float,
                      steps: int, **details: Any) -> None:
    """
    Log a finished optimization run
    """
    logger = get_logger("search")
    logger.info("optimization_finished",
                method=method,
                graph=graph,
                initial_cost=initial_cost,
                final_cost=final_cost,
                steps=steps,
                **details)
