"""Trapezoid grids and tensor-product contraction of factored integrands.

Circle contours use uniformly spaced angular nodes, which converge
geometrically for integrands analytic in an annulus around the contour.
Each dimension's grid carries a distinct golden-ratio fraction of one
angular step as offset: reduced integrands have removable 0/0 points on
the diagonals z_i = z_j and anti-diagonals z_i z_j = 1/q of the torus
(and at z = +-radius), and factor-wise evaluation must never land exactly
on one.
"""

from __future__ import annotations

import math
from typing import Dict, Sequence, Tuple

import numpy as np

_GOLDEN = 0.6180339887498949


def circle_nodes(radius: float, n_nodes: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and dz/(2 pi i) weights on a positively oriented circle.

    dim selects the per-dimension angular offset.
    """
    offset = ((dim + 1) * _GOLDEN) % 1.0
    theta = 2.0 * np.pi * (np.arange(n_nodes) + offset) / n_nodes
    z = radius * np.exp(1j * theta)
    return z, z / n_nodes


def line_nodes(real_part: float, half_height: float, spacing: float,
               dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and dw/(2 pi i) weights on an upward vertical line, truncated.

    Offsets keep every node off y = 0 and off other dimensions' grids.
    """
    offset = ((dim + 1) * _GOLDEN) % 1.0
    k_max = int(math.ceil(half_height / spacing))
    y = (np.arange(-k_max, k_max) + offset) * spacing
    w = real_part + 1j * y
    weights = np.full(w.shape, spacing / (2.0 * np.pi))
    return w, weights


def contract_factored(n_dims: int,
                      vectors: Dict[int, np.ndarray],
                      matrices: Dict[Tuple[int, int], np.ndarray],
                      scalar: complex = 1.0) -> complex:
    """Sum over the full tensor grid of a product of per-dim vectors and pair matrices.

    vectors[d] has the d-th grid length; matrices[(d, e)] with d < e couples
    two grids.  Contraction is delegated to einsum, which finds a pairwise
    path well below materializing the full grid for the sizes used here.
    """
    if n_dims > 26:
        raise ValueError("too many dimensions for einsum letters")
    letters = "abcdefghijklmnopqrstuvwxyz"
    subs = []
    ops = []
    for d in range(n_dims):
        subs.append(letters[d])
        ops.append(vectors[d])
    for (d, e), mat in sorted(matrices.items()):
        subs.append(letters[d] + letters[e])
        ops.append(mat)
    if not ops:
        return scalar
    total = np.einsum(",".join(subs) + "->", *ops, optimize=True)
    return scalar * complex(total)
