from .core import (
    PENALTY,
    Backend,
    BoundModel,
    MetricKind,
    reduce,
    set_data,
)

__all__ = ["PENALTY", "Backend", "BoundModel", "MetricKind", "reduce", "set_data"]
