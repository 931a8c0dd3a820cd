"""Exception types shared across the engine."""


class StregionError(Exception):
    """Base class for all engine errors."""


class GraphError(StregionError):
    """Malformed graph input (self loops, duplicate edges, bad ids)."""


class DisconnectedGraphError(GraphError):
    """Graph is not connected; carries one unreachable area id."""

    def __init__(self, area: int, message: str | None = None):
        self.area = area
        super().__init__(message or f"graph is disconnected: area {area} is unreachable")


class DisconnectedClusterError(StregionError):
    """A cluster does not induce a connected subgraph, so no compatible tree exists."""

    def __init__(self, cluster: int, message: str | None = None):
        self.cluster = cluster
        super().__init__(
            message or f"cluster {cluster} is not connected in the graph; no compatible tree exists"
        )


class ValidationError(StregionError):
    """Invalid configuration or data files."""


class InvariantError(StregionError):
    """Internal sampler invariant breached; carries a diagnostic dump."""

    def __init__(self, message: str, dump: dict | None = None):
        self.dump = dump or {}
        super().__init__(message)
