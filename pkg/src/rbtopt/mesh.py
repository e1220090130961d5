"""Structured simplex meshes for the benchmark domains.

Three builders: a rectangular half beam (symmetry reduced), an L-shaped
bracket, and a slender 3D box cantilever.  All produce first-order
simplex elements (3-node triangles, 4-node tets) with consistent
positive orientation, plus the boundary conditions that define each
benchmark.  Loads are stored as (dof, weight) pairs with weights
summing to one, so the sampled load magnitude scales the whole patch.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class Mesh:
    """Immutable simplex mesh with boundary conditions.

    Attributes
    ----------
    dimension : 2 or 3.
    nodes : (n_nodes, dimension) coordinates.
    elements : (n_elements, dimension + 1) node indices, positively
        oriented (counter-clockwise triangles, right-handed tets).
    fixed_dofs : sorted unique constrained dof indices.
    load_dofs : dof indices receiving the sampled point/patch load.
    load_weights : weight per load dof, summing to one.
    char_length : characteristic cell edge used for the filter radius.
    """

    dimension: int
    nodes: NDArray[np.float64]
    elements: NDArray[np.int64]
    fixed_dofs: NDArray[np.int64]
    load_dofs: NDArray[np.int64]
    load_weights: NDArray[np.float64]
    char_length: float
    volumes: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        if self.dimension not in (2, 3):
            raise ValueError(f"unsupported dimension {self.dimension}")
        if nodes.ndim != 2 or nodes.shape[1] != self.dimension:
            raise ValueError("nodes must be (n_nodes, dimension)")
        if elements.ndim != 2 or elements.shape[1] != self.dimension + 1:
            raise ValueError("elements must be (n_elements, dimension + 1)")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise ValueError("element connectivity references missing nodes")
        for col in range(1, elements.shape[1]):
            if np.any(elements[:, 0] == elements[:, col]):
                raise ValueError("degenerate element with repeated node")
        vols = simplex_volumes(nodes, elements)
        if np.any(vols <= 0.0):
            bad = int(np.argmin(vols))
            raise ValueError(f"element {bad} has non-positive volume {vols[bad]:.3e}")
        object.__setattr__(self, "volumes", vols)
        fixed = np.asarray(self.fixed_dofs, dtype=np.int64)
        if fixed.size == 0:
            raise ValueError("mesh has no constrained dofs")
        if np.any(np.diff(fixed) <= 0):
            raise ValueError("fixed_dofs must be sorted and unique")
        if fixed.min() < 0 or fixed.max() >= self.n_dofs:
            raise ValueError("fixed dof index out of range")
        lw = np.asarray(self.load_weights, dtype=np.float64)
        ld = np.asarray(self.load_dofs, dtype=np.int64)
        if ld.shape != lw.shape or ld.ndim != 1 or ld.size == 0:
            raise ValueError("load_dofs and load_weights must be matching 1D arrays")
        if abs(lw.sum() - 1.0) > 1e-12:
            raise ValueError(f"load weights sum to {lw.sum()!r}, expected 1")
        if np.intersect1d(ld, fixed).size:
            raise ValueError("loaded dof is also constrained")
        for arr in (nodes, elements, vols, fixed, ld, lw):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dimension

    @property
    def total_volume(self) -> float:
        return float(self.volumes.sum())

    def centroids(self) -> NDArray[np.float64]:
        return self.nodes[self.elements].mean(axis=1)


def simplex_volumes(nodes: NDArray, elements: NDArray) -> NDArray[np.float64]:
    """Signed areas (2D) or volumes (3D) of first-order simplices."""
    verts = nodes[elements]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    if nodes.shape[1] == 2:
        return 0.5 * np.linalg.det(edges)
    return np.linalg.det(edges) / 6.0


def structured_rectangle(width: float, height: float, nx: int, ny: int
                         ) -> Tuple[NDArray, NDArray]:
    """Uniform triangulation of [0,width]x[0,height], 2 triangles per cell.

    Node numbering is column major: node(ix, iy) = ix*(ny+1) + iy.
    Every cell is split along the same diagonal so the pattern is uniform.
    """
    if width <= 0 or height <= 0 or nx < 1 or ny < 1:
        raise ValueError("rectangle dimensions and cell counts must be positive")
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    nodes = np.column_stack([np.repeat(xs, ny + 1), np.tile(ys, nx + 1)])
    tris = []
    for ix in range(nx):
        for iy in range(ny):
            n00 = ix * (ny + 1) + iy
            n10 = (ix + 1) * (ny + 1) + iy
            n01 = n00 + 1
            n11 = n10 + 1
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    return nodes, np.asarray(tris, dtype=np.int64)


def build_rect_half_beam(length: float, nx: int, ny: int) -> Mesh:
    """Right half of a simply supported beam under a central point load.

    Domain [0, length/2] x [0, length/6].  Symmetry plane at x=0 carries
    roller conditions (x displacement fixed); the bottom right corner is
    the simple support (y fixed); the load acts at the top of the
    symmetry plane.
    """
    width, height = length / 2.0, length / 6.0
    nodes, tris = structured_rectangle(width, height, nx, ny)

    def nid(ix, iy):
        return ix * (ny + 1) + iy

    fixed = [2 * nid(0, iy) for iy in range(ny + 1)]
    fixed.append(2 * nid(nx, 0) + 1)
    load_node = nid(0, ny)
    return Mesh(
        dimension=2,
        nodes=nodes,
        elements=tris,
        fixed_dofs=np.unique(fixed),
        load_dofs=np.array([2 * load_node + 1], dtype=np.int64),
        load_weights=np.array([1.0]),
        char_length=width / nx,
    )


def build_l_beam(length: float, resolution: int) -> Mesh:
    """L-shaped bracket: [0,length]^2 minus the upper right two-thirds block.

    `resolution` cells span each side and must be divisible by 3 so the
    re-entrant corner lands on the grid.  The top edge is fully clamped;
    the load is vertical at the right-edge node closest to y = length/6.
    """
    if resolution < 3 or resolution % 3 != 0:
        raise ValueError("l-beam resolution must be a positive multiple of 3")
    r = resolution
    h = length / r
    third = r // 3

    kept_cells = [(ix, iy) for ix in range(r) for iy in range(r)
                  if ix < third or iy < third]
    grid_tris = []
    for ix, iy in kept_cells:
        n00 = ix * (r + 1) + iy
        n10 = (ix + 1) * (r + 1) + iy
        n01 = n00 + 1
        n11 = n10 + 1
        grid_tris.append((n00, n10, n11))
        grid_tris.append((n00, n11, n01))
    grid_tris = np.asarray(grid_tris, dtype=np.int64)

    used = np.unique(grid_tris)
    renum = -np.ones((r + 1) * (r + 1), dtype=np.int64)
    renum[used] = np.arange(used.size)
    tris = renum[grid_tris]
    xs = used // (r + 1)
    ys = used % (r + 1)
    nodes = np.column_stack([xs * h, ys * h]).astype(np.float64)

    top = np.flatnonzero(ys == r)
    fixed = np.sort(np.concatenate([2 * top, 2 * top + 1]))

    right = np.flatnonzero(xs == r)
    target_y = length / 6.0
    load_node = right[np.argmin(np.abs(nodes[right, 1] - target_y))]
    return Mesh(
        dimension=2,
        nodes=nodes,
        elements=tris,
        fixed_dofs=fixed,
        load_dofs=np.array([2 * load_node + 1], dtype=np.int64),
        load_weights=np.array([1.0]),
        char_length=h,
    )


# Six-tet split of a hex cell around the main diagonal v000 -> v111.
# Each row lists corner keys (dx, dy, dz); orderings give positive volumes.
_KUHN_TETS = (
    ((0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 1, 1), (1, 0, 1)),
    ((0, 0, 0), (1, 1, 0), (0, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (0, 1, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 1), (0, 0, 1), (1, 1, 1)),
)


def build_box_cantilever(length: float, nx: int, ny: int, nz: int) -> Mesh:
    """Slender box cantilever, cross section length/3 tall by length/5 wide.

    Clamped on the x=0 face.  The load is a line patch on the free face:
    nodes within a band of height length/6 centered at mid height, all
    widths, pulled in -y with uniform weights.  Falls back to the single
    node row nearest mid height when the band is empty on coarse grids.
    """
    if length <= 0 or min(nx, ny, nz) < 1:
        raise ValueError("box dimensions and cell counts must be positive")
    ly, lz = length / 3.0, length / 5.0
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    zs = np.linspace(0.0, lz, nz + 1)

    def nid(ix, iy, iz):
        return (ix * (ny + 1) + iy) * (nz + 1) + iz

    grid = np.array(np.meshgrid(xs, ys, zs, indexing="ij"))
    nodes = grid.reshape(3, -1).T.copy()

    tets = []
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                for corners in _KUHN_TETS:
                    tets.append(tuple(nid(ix + dx, iy + dy, iz + dz)
                                      for dx, dy, dz in corners))
    tets = np.asarray(tets, dtype=np.int64)

    clamped = np.array([nid(0, iy, iz)
                        for iy in range(ny + 1) for iz in range(nz + 1)])
    fixed = np.sort(np.concatenate([3 * clamped, 3 * clamped + 1, 3 * clamped + 2]))

    band = length / 12.0
    tol = 1e-9 * length
    mid = ly / 2.0
    iy_in_band = [iy for iy in range(ny + 1) if abs(ys[iy] - mid) <= band + tol]
    if not iy_in_band:
        dist = np.abs(ys - mid)
        iy_in_band = [int(np.argmin(dist))]
    load_nodes = np.array([nid(nx, iy, iz)
                           for iy in iy_in_band for iz in range(nz + 1)])
    weights = np.full(load_nodes.size, 1.0 / load_nodes.size)
    return Mesh(
        dimension=3,
        nodes=nodes,
        elements=tets,
        fixed_dofs=fixed,
        load_dofs=3 * load_nodes + 1,
        load_weights=weights,
        char_length=length / nx,
    )
