"""Python access to the ad-auction solver, mechanisms and simulator."""

from ._core import (
    Config,
    ConfigError,
    DiscreteUnsupported,
    Distribution,
    Error,
    IoError,
    IrregularDistribution,
    NotConverged,
    OutOfSupport,
    Solution,
    StateOffGrid,
    TooLarge,
    exact_policy,
    load_config,
    load_solution,
    parse_config,
    run_auction,
    simulate,
    solve,
    verify,
)

__all__ = [
    "Config",
    "ConfigError",
    "DiscreteUnsupported",
    "Distribution",
    "Error",
    "IoError",
    "IrregularDistribution",
    "NotConverged",
    "OutOfSupport",
    "Solution",
    "StateOffGrid",
    "TooLarge",
    "exact_policy",
    "load_config",
    "load_solution",
    "parse_config",
    "run_auction",
    "simulate",
    "solve",
    "verify",
]
