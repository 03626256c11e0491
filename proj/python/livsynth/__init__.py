"""Python access to the livsynth core: genomes, the cost model, diagrams and selection primitives."""

from ._core import (
    ConfigError,
    GenomeParseError,
    LivsynthError,
    canonical,
    class_names,
    crowding_distance,
    fa_attraction,
    hypervolume,
    non_dominated_sort,
    normalize,
    render,
    run_cli,
    scalarize,
    score,
    sharing_distances,
    striped_hybrid,
    validate,
)

__all__ = [
    "ConfigError",
    "GenomeParseError",
    "LivsynthError",
    "canonical",
    "class_names",
    "crowding_distance",
    "fa_attraction",
    "hypervolume",
    "non_dominated_sort",
    "normalize",
    "render",
    "run_cli",
    "scalarize",
    "score",
    "sharing_distances",
    "striped_hybrid",
    "validate",
]
