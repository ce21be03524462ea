"""Python access to the spdcsim core: source design, counting, interference and the CLI."""

from ._core import (
    __version__,
    Config,
    Basis,
    design,
    schmidt,
    heralded_efficiency,
    pair_dist,
    basis_visibility,
    hom_overlap,
    execute,
    report,
    main,
)

__all__ = [
    "__version__",
    "Config",
    "Basis",
    "design",
    "schmidt",
    "heralded_efficiency",
    "pair_dist",
    "basis_visibility",
    "hom_overlap",
    "execute",
    "report",
    "main",
]
