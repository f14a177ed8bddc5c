"""Closed-form elastic wall response of the tube.

The wall is quasi-static and radial-only: circumferential stress is linear
in the hoop strain, and equilibrium with the fluid pressure gives an
algebraic tube law mapping pressure to radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import TubeParams
from .errors import WallBlowUpError

__all__ = [
    "WallResponse",
    "SINGULARITY_MARGIN",
    "singular_pressure",
    "circumferential_stress",
    "radius_from_pressure",
    "solve_structure",
]

# Pressures above (1 - margin) * E*h/r0 are rejected: the tube law diverges
# there and the fluid solver must see a hard error, not a huge area.
SINGULARITY_MARGIN = 1e-6


@dataclass(frozen=True)
class WallResponse:
    """Per-node wall radius and the corresponding cross-sectional area."""

    radius: np.ndarray
    area: np.ndarray


def singular_pressure(params: TubeParams) -> float:
    """Pressure at which the tube law diverges, E*h/r0."""
    return params.elastic_modulus * params.h / params.r0


def circumferential_stress(r, params: TubeParams):
    """Hoop stress sigma = E*(r - r0)/r0 + sigma0. Accepts scalars or arrays."""
    return params.elastic_modulus * (np.asarray(r, dtype=np.float64) - params.r0) / params.r0 + params.sigma0


def radius_from_pressure(p: float, params: TubeParams) -> float:
    """Wall radius in equilibrium with transmural pressure ``p``.

    Solves p*r = sigma(r)*h in closed form: r = h*(sigma0 - E)/(p - E*h/r0).
    Strictly increasing in p on the admissible range.
    """
    p_sing = singular_pressure(params)
    if p >= p_sing * (1.0 - SINGULARITY_MARGIN):
        raise WallBlowUpError(
            f"pressure {p} at or beyond the singular pressure {p_sing} of the tube law"
        )
    r = params.h * (params.sigma0 - params.elastic_modulus) / (p - p_sing)
    if r <= 0:
        raise WallBlowUpError(f"tube law returned non-positive radius {r} for pressure {p}")
    return r


def solve_structure(p_field, params: TubeParams) -> WallResponse:
    """Pointwise wall response for a per-node pressure field.

    Node i of the output depends only on node i of the input; errors carry
    the offending node index.
    """
    p = np.asarray(p_field, dtype=np.float64)
    p_sing = singular_pressure(params)
    bad = np.nonzero(p >= p_sing * (1.0 - SINGULARITY_MARGIN))[0]
    if bad.size:
        raise WallBlowUpError(
            f"pressure {p[bad[0]]} at node {bad[0]} at or beyond the singular "
            f"pressure {p_sing}",
            node=int(bad[0]),
        )
    r = params.h * (params.sigma0 - params.elastic_modulus) / (p - p_sing)
    nonpos = np.nonzero(r <= 0)[0]
    if nonpos.size:
        raise WallBlowUpError(
            f"tube law returned non-positive radius at node {nonpos[0]}",
            node=int(nonpos[0]),
        )
    return WallResponse(radius=r, area=math.pi * r * r)
