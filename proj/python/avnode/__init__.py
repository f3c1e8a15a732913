"""Dual-pathway AV-node model and property estimation from RR series."""

from ._avnode import (
    AbcStall,
    DataError,
    UsageError,
    bounds,
    delay,
    estimate,
    ingest,
    kde_bandwidth,
    kde_mode,
    ks_distance,
    param_names,
    percentiles,
    poincare_error,
    poincare_histogram,
    property_summary,
    reduce,
    refractory,
    report,
    simulate,
    spearman,
    synth,
    trends,
)

__all__ = [
    "AbcStall",
    "DataError",
    "UsageError",
    "bounds",
    "delay",
    "estimate",
    "ingest",
    "kde_bandwidth",
    "kde_mode",
    "ks_distance",
    "param_names",
    "percentiles",
    "poincare_error",
    "poincare_histogram",
    "property_summary",
    "reduce",
    "refractory",
    "report",
    "simulate",
    "spearman",
    "synth",
    "trends",
]
