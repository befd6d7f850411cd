"""Exception types raised across the package."""


class HubcapError(Exception):
    """Base class for all package errors."""


class DuplicateNodeId(HubcapError):
    def __init__(self, node_id):
        super().__init__(f"duplicate node id {node_id!r}")
        self.node_id = node_id


class InvalidArc(HubcapError):
    pass


class DisconnectedDemandPair(HubcapError):
    def __init__(self, pairs):
        pairs = sorted(pairs)
        listed = ", ".join(f"{o}->{d}" for o, d in pairs)
        super().__init__(f"no hub-relay path for demand pair(s): {listed}")
        self.pairs = pairs


class UnreachableDemand(DisconnectedDemandPair):
    """Raised when a scenario set references a pair the network cannot serve."""


class EmptyHistory(HubcapError):
    pass


class Infeasible(HubcapError):
    pass


class TimedOut(HubcapError):
    """Raised only when the time limit expires before any incumbent exists."""


class HorizonMismatch(HubcapError):
    def __init__(self, expected, got):
        super().__init__(f"simulation horizon is {expected} days but {got} daily demand maps were given")
        self.expected = expected
        self.got = got


class ConstraintViolation(HubcapError):
    def __init__(self, violations):
        head = "; ".join(violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"solution violates model constraints: {head}{more}")
        self.violations = list(violations)


class ConfigError(HubcapError):
    pass
