"""
Metrics - Prometheus collectors for environment, world-model and controller activity
"""

import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, Optional

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, generate_latest

from graphdream.utils.logging import get_logger

logger = get_logger(__name__)


class MetricsCollector:
    """Centralized metrics collection; owns its registry so runs never share state."""

    def __init__(self):
        self.registry = CollectorRegistry()

        # Interaction metrics
        self.env_steps_total = Counter(
            "env_steps_total",
            "Environment steps taken",
            ["kind"],
            registry=self.registry,
        )

        self.episodes_total = Counter(
            "episodes_total",
            "Finished episodes",
            ["source"],
            registry=self.registry,
        )

        self.rule_applications_total = Counter(
            "rule_applications_total",
            "Successful rewrite applications",
            ["rule"],
            registry=self.registry,
        )

        self.invalid_actions_total = Counter(
            "invalid_actions_total",
            "Masked-out actions submitted to the real environment",
            registry=self.registry,
        )

        self.step_duration_seconds = Histogram(
            "step_duration_seconds",
            "Wall time of one environment step",
            ["kind"],
            buckets=(1e-5, 1e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1, 0.5, 1.0),
            registry=self.registry,
        )

        # Training metrics
        self.wm_loss = Gauge(
            "wm_loss",
            "Latest world-model loss by component",
            ["component"],
            registry=self.registry,
        )

        self.controller_reward = Gauge(
            "controller_reward",
            "Mean episode reward of the latest controller update",
            registry=self.registry,
        )

    def record_step(self, kind: str, duration: float):
        """Record one environment (real or dream) step"""
        self.env_steps_total.labels(kind=kind).inc()
        self.step_duration_seconds.labels(kind=kind).observe(duration)

    def record_episode(self, source: str):
        self.episodes_total.labels(source=source).inc()

    def record_rule_application(self, rule: str):
        self.rule_applications_total.labels(rule=rule).inc()

    def record_invalid_action(self):
        self.invalid_actions_total.inc()

    def set_wm_losses(self, losses: Dict[str, float]):
        for component, value in losses.items():
            self.wm_loss.labels(component=component).set(value)

    def set_controller_reward(self, value: float):
        self.controller_reward.set(value)

    def counter_value(self, name: str, **labels: str) -> float:
        """Current value of a counter sample (0 when never incremented)"""
        value = self.registry.get_sample_value(f"{name}_total", labels or None)
        return float(value or 0.0)

    def get_metrics(self) -> bytes:
        """Prometheus text exposition of the registry"""
        return generate_latest(self.registry)

    def write(self, out_dir: Path) -> Path:
        """Dump the registry as metrics.prom into out_dir"""
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "metrics.prom"
        path.write_bytes(self.get_metrics())
        return path


class PerformanceMonitor:
    """Step timing helper"""

    def __init__(self, metrics: Optional[MetricsCollector]):
        self.metrics = metrics

    @contextmanager
    def time_step(self, kind: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            if self.metrics is not None:
                self.metrics.record_step(kind, time.perf_counter() - start)
