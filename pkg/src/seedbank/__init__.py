"""Exact simulation and verification tools for the multi-colony Moran model with seed-banks."""
from __future__ import annotations

__version__ = "0.1.0"

from .geometry import ColonyProfile, Geometry, ProfileSpec, build_profile
from .kernel import KernelError, KernelSpec, MigrationKernel, build_kernel
from .model import Configuration, System, config_add_sub, delta, sample_initial

__all__ = [
    "ColonyProfile",
    "Configuration",
    "Geometry",
    "KernelError",
    "KernelSpec",
    "MigrationKernel",
    "ProfileSpec",
    "System",
    "build_kernel",
    "build_profile",
    "config_add_sub",
    "delta",
    "sample_initial",
]
