"""
graphdream - computation-graph superoptimizer driven by a world-model RL agent
"""

__version__ = "0.1.0"
