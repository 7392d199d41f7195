"""Concave envelopes of edge objectives and the randomized prices attaining them."""

from src.ironing.envelope import (
    IronedObjective,
    coarsen,
    envelope_derivative,
    envelope_value,
    iron,
    scaled,
    throughput_grid,
    upper_hull,
)
from src.ironing.mixture import MixtureEntry, PriceMixture, price_mixture

__all__ = [
    "IronedObjective",
    "coarsen",
    "envelope_derivative",
    "envelope_value",
    "iron",
    "scaled",
    "throughput_grid",
    "upper_hull",
    "MixtureEntry",
    "PriceMixture",
    "price_mixture",
]
