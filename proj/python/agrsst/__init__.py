"""Density reconstruction from area-aggregated counts: GRSST, AGRSST and AGRSST1."""

from ._core import (
    AgrsstError,
    Density,
    Grid,
    Raster,
    Regions,
    __version__,
    aux_from_aggregates,
    aux_from_raster,
    cli,
    correlation_weight,
    evaluate_kde,
    ndvi,
    render_ppm,
    rmise,
    rmise_pixel_weighted,
    run_agrsst,
    run_agrsst1,
    run_grsst,
    select_bandwidth,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
