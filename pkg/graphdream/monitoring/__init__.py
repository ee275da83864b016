from graphdream.monitoring.metrics import MetricsCollector, PerformanceMonitor

__all__ = ["MetricsCollector", "PerformanceMonitor"]
