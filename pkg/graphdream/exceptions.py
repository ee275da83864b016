"""
Exceptions - Error hierarchy shared by every graphdream module
"""


class GraphDreamError(Exception):
    """Base class for all graphdream errors"""


class ConfigError(GraphDreamError):
    """Invalid or unreadable run configuration"""


class GraphError(GraphDreamError):
    """Problems with a computation graph"""


class MalformedGraph(GraphError):
    """Graph fails structural validation (cycle, arity, dangling reference)"""


class ShapeMismatch(GraphError):
    """Operand shapes are incompatible with an operator's shape rule"""


class MissingInput(GraphError):
    """No tensor supplied for an Input node during evaluation"""


class RuleError(GraphDreamError):
    """Problems with rewrite rules"""


class StaleLocation(RuleError):
    """Match location no longer valid for the graph it is applied to"""


class UnboundVariable(RuleError):
    """Target pattern references a variable the source pattern does not bind"""


class RuleFormatError(RuleError):
    """Rule document cannot be parsed"""


class EnvError(GraphDreamError):
    """Environment misuse"""


class EpisodeFinished(EnvError):
    """step() called after the episode terminated"""


class NoValidAction(EnvError):
    """Every action, NO-OP included, is masked out"""


class TrainingError(GraphDreamError):
    """Training loop failures"""


class DivergenceDetected(TrainingError):
    """A loss became NaN or infinite"""


class InvalidSpec(GraphDreamError):
    """Model-zoo spec outside the supported range"""


class CheckpointError(GraphDreamError):
    """Checkpoint file missing, corrupt, or of an unknown format version"""
