"""Footprint-local kernels wrapping the projection and prox operations.

Each kernel acts on the subvector of heights selected by its term's
footprint. Kernels of the same class and footprint length can be stacked
and evaluated together; the solver relies on this to process hundreds of
triangle terms per iteration in a few numpy calls.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import curvature, linear, slope


class Kernel:
    kind = "constraint"

    def apply(self, z: np.ndarray, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def value(self, z: np.ndarray) -> float:
        return 0.0

    @classmethod
    def stack(cls, kernels):
        return list(kernels)

    @classmethod
    def apply_stacked(cls, params, Z: np.ndarray, gamma: float) -> np.ndarray:
        return np.stack([k.apply(z, gamma) for k, z in zip(params, Z)])


@dataclass(frozen=True)
class IntervalKernel(Kernel):
    lower: np.ndarray
    upper: np.ndarray

    def apply(self, z, gamma):
        return linear.project_interval(z, self.lower, self.upper)

    @classmethod
    def stack(cls, kernels):
        return np.stack([k.lower for k in kernels]), np.stack([k.upper for k in kernels])

    @classmethod
    def apply_stacked(cls, params, Z, gamma):
        return np.clip(Z, params[0], params[1])


@dataclass(frozen=True)
class EdgeSlopeKernel(Kernel):
    """``lo <= z_i - z_j <= hi`` on footprint ``(i, j)``; ``hi`` may be inf."""

    lo: float
    hi: float = np.inf

    def apply(self, z, gamma):
        zi, zj = linear.project_edge_slope_slab(z[0], z[1], self.lo, self.hi)
        return np.array([zi, zj])

    @classmethod
    def stack(cls, kernels):
        return np.array([k.lo for k in kernels]), np.array([k.hi for k in kernels])

    @classmethod
    def apply_stacked(cls, params, Z, gamma):
        zi, zj = linear.project_edge_slope_slab(Z[:, 0], Z[:, 1], params[0], params[1])
        return np.column_stack([zi, zj])


@dataclass(frozen=True)
class LowPointKernel(Kernel):
    alphas: tuple

    def apply(self, z, gamma):
        return linear.project_low_point(z, self.alphas)


@dataclass(frozen=True)
class EdgeAlignKernel(Kernel):
    t: tuple

    def apply(self, z, gamma):
        return linear.project_edge_alignment(z, self.t)


@dataclass(frozen=True, eq=False)
class SurfaceAlignKernel(Kernel):
    positions: np.ndarray

    def apply(self, z, gamma):
        return linear.project_surface_alignment(z, self.positions)


@dataclass(frozen=True)
class MaxSlopeKernel(Kernel):
    frame: tuple
    s_max: float

    def apply(self, z, gamma):
        return slope.max_slope_batch(np.asarray(self.frame), z, self.s_max)[0]

    @classmethod
    def stack(cls, kernels):
        return np.array([k.frame for k in kernels]), np.array([k.s_max for k in kernels])

    @classmethod
    def apply_stacked(cls, params, Z, gamma):
        return slope.max_slope_batch(params[0], Z, params[1])


@dataclass(frozen=True)
class MinSlopeKernel(Kernel):
    frame: tuple
    s_min: float
    q: tuple

    def apply(self, z, gamma):
        return slope.min_slope_batch(np.asarray(self.frame), z, self.s_min, self.q)[0]

    @classmethod
    def stack(cls, kernels):
        return (np.array([k.frame for k in kernels]), np.array([k.s_min for k in kernels]),
                np.array([k.q for k in kernels]))

    @classmethod
    def apply_stacked(cls, params, Z, gamma):
        return slope.min_slope_batch(params[0], Z, params[1], params[2])


@dataclass(frozen=True, eq=False)
class AbsLinearKernel(Kernel):
    """Objective ``weight * |<u, z>|``."""

    u: np.ndarray
    weight: float
    kind = "objective"

    def apply(self, z, gamma):
        return curvature.prox_abs_linear(z, self.u, gamma * self.weight)

    def value(self, z):
        return float(self.weight * abs(np.dot(self.u, z)))

    @classmethod
    def stack(cls, kernels):
        return np.stack([k.u for k in kernels]), np.array([k.weight for k in kernels])

    @classmethod
    def apply_stacked(cls, params, Z, gamma):
        U, w = params
        return Z - curvature.project_segment(Z, (gamma * w)[:, None] * U)


@dataclass(frozen=True, eq=False)
class MaxPairKernel(Kernel):
    """Objective ``weight * max(|<u, z>|, |<v, z>|)``."""

    u: np.ndarray
    v: np.ndarray
    weight: float
    kind = "objective"

    def apply(self, z, gamma):
        return curvature.prox_max_pair(z, self.u, self.v, gamma * self.weight)

    def value(self, z):
        return float(self.weight * max(abs(np.dot(self.u, z)), abs(np.dot(self.v, z))))

    @classmethod
    def stack(cls, kernels):
        return (np.stack([k.u for k in kernels]), np.stack([k.v for k in kernels]),
                np.array([k.weight for k in kernels]))

    @classmethod
    def apply_stacked(cls, params, Z, gamma):
        U, V, w = params
        a = (gamma * w)[:, None]
        return Z - curvature.project_parallelogram(Z, a * U, a * V)
