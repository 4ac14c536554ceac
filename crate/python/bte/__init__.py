"""Kinetic transport engine bindings."""

from bte._native import (
    Domain,
    Kernel,
    collision_frequency,
    linear_decay,
    maxwellian,
    nu_0,
    nu_1,
    theta,
)

__all__ = [
    "Domain",
    "Kernel",
    "collision_frequency",
    "linear_decay",
    "maxwellian",
    "nu_0",
    "nu_1",
    "theta",
]
