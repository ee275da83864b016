"""
Model Zoo - Toy analogues of the evaluation graphs
"""

from graphdream.zoo.builders import DEFAULT_SPECS, ZOO_NAMES, ZooSpec, build, build_by_name

__all__ = ["DEFAULT_SPECS", "ZOO_NAMES", "ZooSpec", "build", "build_by_name"]
