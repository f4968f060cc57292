"""Python bindings for the ccpt playtesting core."""

from ._core import (
    AgentState,
    ConfigError,
    InvariantError,
    NumericError,
    ParseError,
    ShapeError,
    VoxelMap,
    action_names,
    average_curiosity,
    imitation_reward,
    load_map,
    play_script,
    positional_embedding,
    quantile,
    read_export,
    reset,
    run_cli,
    step,
    triage,
)

__all__ = [
    "AgentState",
    "ConfigError",
    "InvariantError",
    "NumericError",
    "ParseError",
    "ShapeError",
    "VoxelMap",
    "action_names",
    "average_curiosity",
    "imitation_reward",
    "load_map",
    "play_script",
    "positional_embedding",
    "quantile",
    "read_export",
    "reset",
    "run_cli",
    "step",
    "triage",
]
