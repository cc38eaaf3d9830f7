"""Domain partitions and the map between coefficient vectors and wavespeed fields.

The domain is the unit ball, embedded in a uniform voxel grid over the cube
[-S, S]^3.  A partition labels every voxel with an integer 0..N; label 0 is
the background (wavespeed 1) and must cover everything within ``epsilon`` of
the unit sphere.  A model vector b assigns a constant wavespeed b_j to the
voxels of label j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, InvalidModelError, ValidationError

DEFAULT_HALF_SIDE = 1.5
DEFAULT_GRID = 48
DEFAULT_EPSILON = 0.1


@dataclass(frozen=True)
class VoxelGrid:
    """Uniform grid of voxel centers over the cube [-half_side, half_side]^3."""

    n: int = DEFAULT_GRID
    half_side: float = DEFAULT_HALF_SIDE

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_side / self.n

    @property
    def volume_element(self) -> float:
        return self.spacing**3

    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.half_side + h * (np.arange(self.n) + 0.5)

    def centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ax = self.axis()
        return np.meshgrid(ax, ax, ax, indexing="ij")

    def radii(self) -> np.ndarray:
        x, y, z = self.centers()
        return np.sqrt(x * x + y * y + z * z)

    def compatible(self, other: "VoxelGrid") -> bool:
        return self.n == other.n and np.isclose(self.half_side, other.half_side)


@dataclass(frozen=True)
class DomainPartition:
    """Voxel labeling of the unit ball into subdomains D_0 .. D_N.

    ``labels`` holds one integer per voxel; ``radii`` is set for radial
    partitions (nested shells split at the given interface radii) and is
    None for general labeled-grid partitions.
    """

    grid: VoxelGrid
    labels: np.ndarray
    n_regions: int
    epsilon: float = DEFAULT_EPSILON
    radii: tuple[float, ...] | None = None

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (self.grid.n,) * 3:
            raise ValidationError("label raster does not match the voxel grid")
        if lab.min() < 0 or lab.max() > self.n_regions:
            raise ValidationError("labels must lie in 0..N")
        r = self.grid.radii()
        near_boundary = (r >= 1.0 - self.epsilon) & (lab != 0)
        if np.any(near_boundary):
            raise ValidationError(
                "voxels within epsilon of the boundary must carry label 0"
            )

    @property
    def n_params(self) -> int:
        return self.n_regions

    def region_mask(self, j: int) -> np.ndarray:
        return self.labels == j

    def region_volumes(self) -> np.ndarray:
        """Voxel-counted volume |D_j| for j = 1..N."""
        vol = self.grid.volume_element
        return np.array(
            [np.count_nonzero(self.labels == j) * vol for j in range(1, self.n_regions + 1)]
        )


def radial_partition(
    radii,
    grid: VoxelGrid | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> DomainPartition:
    """Nested-shell partition: D_1 = {r < r_1}, D_j = {r_{j-1} <= r < r_j}."""
    grid = grid or VoxelGrid()
    radii = tuple(float(r) for r in radii)
    if not radii or any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValidationError("interface radii must be strictly increasing")
    if radii[0] <= 0 or radii[-1] >= 1.0 - epsilon:
        raise ValidationError("radii must satisfy 0 < r_1 < ... < r_N < 1 - epsilon")
    r = grid.radii()
    labels = np.zeros(r.shape, dtype=np.int32)
    edges = (0.0,) + radii
    for j in range(1, len(edges)):
        labels[(r >= edges[j - 1]) & (r < edges[j])] = j
    return DomainPartition(
        grid=grid, labels=labels, n_regions=len(radii), epsilon=epsilon, radii=radii
    )


def labeled_partition(
    labels: np.ndarray,
    grid: VoxelGrid | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> DomainPartition:
    """Partition from an explicit voxel label raster."""
    grid = grid or VoxelGrid()
    labels = np.asarray(labels, dtype=np.int32)
    return DomainPartition(
        grid=grid, labels=labels, n_regions=int(labels.max()), epsilon=epsilon
    )


@dataclass(frozen=True)
class Ball:
    """Closed ball in model space: ||b - center|| <= radius, b_j >= b_min."""

    center: np.ndarray
    radius: float
    b_min: float = 0.2

    def contains(self, b: np.ndarray, tol: float = 1e-12) -> bool:
        b = np.asarray(b, dtype=float)
        return (
            np.linalg.norm(b - self.center) <= self.radius + tol
            and np.all(b >= self.b_min - tol)
        )

    def project(self, b: np.ndarray) -> np.ndarray:
        """Euclidean clamp onto the ball intersected with {b_j >= b_min}."""
        b = np.maximum(np.asarray(b, dtype=float), self.b_min)
        d = b - self.center
        nrm = np.linalg.norm(d)
        if nrm > self.radius:
            b = self.center + d * (self.radius / nrm)
            b = np.maximum(b, self.b_min)
        return b


@dataclass(frozen=True)
class Wavespeed:
    """Piecewise-constant wavespeed field on a voxel grid, == 1 outside the ball."""

    grid: VoxelGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n,) * 3:
            raise GridMismatchError("wavespeed raster does not match the grid")
        if not np.all(np.isfinite(v)) or v.min() <= 0:
            raise InvalidModelError("wavespeed must be positive and finite")

    @property
    def c_min(self) -> float:
        return float(self.values.min())


def validate_model(b, n_regions: int) -> np.ndarray:
    b = np.asarray(b, dtype=float).ravel()
    if b.size != n_regions:
        raise InvalidModelError(
            f"model vector has length {b.size}, partition expects {n_regions}"
        )
    if not np.all(np.isfinite(b)) or np.any(b <= 0):
        raise InvalidModelError("model coefficients must be positive and finite")
    return b


def wavespeed_from_model(b, partition: DomainPartition) -> Wavespeed:
    """Field equal to b_j on voxels labeled j >= 1 and 1 elsewhere."""
    b = validate_model(b, partition.n_params)
    table = np.concatenate(([1.0], b))
    values = table[partition.labels]
    return Wavespeed(grid=partition.grid, values=values)


def model_projection(g: np.ndarray, partition: DomainPartition) -> np.ndarray:
    """Adjoint of b -> sum_j b_j 1_{D_j}: per-region volume integrals of g.

    Component j is the sum of g over voxels labeled j times the voxel volume,
    so that <model_projection(g), h> equals the volume integral of
    g * sum_j h_j 1_{D_j} exactly.
    """
    g = np.asarray(g)
    if g.shape != (partition.grid.n,) * 3:
        raise GridMismatchError("field raster does not match the partition grid")
    vol = partition.grid.volume_element
    return np.array(
        [g[partition.labels == j].sum() * vol for j in range(1, partition.n_regions + 1)]
    )


def perturbation_size(b, b_prime) -> float:
    """max_j |b_j^2 - b'_j^2|, the L-infinity size of c'^2 - c^2 for a shared partition."""
    b = np.asarray(b, dtype=float).ravel()
    b_prime = np.asarray(b_prime, dtype=float).ravel()
    if b.size != b_prime.size:
        raise InvalidModelError("model vectors have different lengths")
    return float(np.max(np.abs(b**2 - b_prime**2))) if b.size else 0.0
