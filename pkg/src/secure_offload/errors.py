"""Exception types raised across the simulator and learning harness."""


class ZeroDistance(ValueError):
    """Two nodes coincide where a strictly positive distance is required."""


class InfeasibleSecrecy(ValueError):
    """A link with zero secrecy rate was asked to carry a non-empty payload."""


class RouteConflict(ValueError):
    """A task was routed both locally and to an edge node, or to neither."""


class NoSecureTarget(RuntimeError):
    """No offload target reaches the minimum secrecy rate."""


class MaskViolation(RuntimeError):
    """An agent submitted an action index that its mask forbids."""


class DimensionMismatch(ValueError):
    pass


class NonFiniteLoss(FloatingPointError):
    pass


class EmptyMask(ValueError):
    pass


class GroupSizeMismatch(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
