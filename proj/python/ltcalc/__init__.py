"""Python bindings for the ltcalc local-time toolkit."""

from ._core import (
    brownian_motion,
    ornstein_uhlenbeck,
    simulate,
    forward_sum,
    backward_sum,
    covariation,
    local_time,
    run_config,
)

__all__ = [
    "brownian_motion",
    "ornstein_uhlenbeck",
    "simulate",
    "forward_sum",
    "backward_sum",
    "covariation",
    "local_time",
    "run_config",
]
