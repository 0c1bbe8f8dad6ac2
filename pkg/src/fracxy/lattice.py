"""Discrete geometry of the square lattice restricted to a bounded domain.

The continuum domain is covered from the inside by closed grid squares of
side ``epsilon``: a cell is retained when it lies entirely inside the
closed domain, sites are the corners of retained cells, and a bond between
two adjacent sites is kept when its segment lies inside the union of
retained cells (equivalently, when it is an edge of at least one retained
cell). All adjacency is done in integer grid coordinates so that bond
lengths are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

# Relative slack for point-in-shape tests; keeps W/eps-integral rectangles exact.
_GEOM_RTOL = 1e-9


class DomainError(ValueError):
    """Raised for degenerate shapes or empty lattice domains."""


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle [x0, x0+w] x [y0, y0+h] in domain units."""

    origin: tuple[float, float]
    size: tuple[float, float]

    def __post_init__(self):
        w, h = self.size
        if w <= 0.0 or h <= 0.0:
            raise DomainError(f"rectangle must have positive extents, got size={self.size}")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        w, h = self.size
        return x0, y0, x0 + w, y0 + h

    @property
    def diameter(self) -> float:
        return float(np.hypot(*self.size))

    @property
    def min_extent(self) -> float:
        return float(min(self.size))

    def contains(self, points: np.ndarray) -> np.ndarray:
        x0, y0, x1, y1 = self.bounds
        p = np.atleast_2d(points)
        tol = _GEOM_RTOL * max(1.0, self.diameter)
        return (
            (p[:, 0] >= x0 - tol)
            & (p[:, 0] <= x1 + tol)
            & (p[:, 1] >= y0 - tol)
            & (p[:, 1] <= y1 + tol)
        )

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from interior points to the boundary curve."""
        x0, y0, x1, y1 = self.bounds
        p = np.atleast_2d(points)
        d = np.minimum.reduce([p[:, 0] - x0, x1 - p[:, 0], p[:, 1] - y0, y1 - p[:, 1]])
        return d

    def to_dict(self) -> dict:
        return {"kind": "rectangle", "origin": list(self.origin), "size": list(self.size)}


@dataclass(frozen=True)
class Disk:
    """Closed disk of given center and radius in domain units."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise DomainError(f"disk must have positive radius, got {self.radius}")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def min_extent(self) -> float:
        return 2.0 * self.radius

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        tol = _GEOM_RTOL * max(1.0, self.radius)
        dx = p[:, 0] - self.center[0]
        dy = p[:, 1] - self.center[1]
        return dx * dx + dy * dy <= (self.radius + tol) ** 2

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        r = np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])
        return self.radius - r

    def to_dict(self) -> dict:
        return {"kind": "disk", "center": list(self.center), "radius": self.radius}


Shape = Union[Rectangle, Disk]


def shape_from_dict(d: dict) -> Shape:
    """Deserialize a shape descriptor from config data."""
    kind = d.get("kind")
    if kind == "rectangle":
        return Rectangle(origin=tuple(d["origin"]), size=tuple(d["size"]))
    if kind == "disk":
        return Disk(center=tuple(d["center"]), radius=float(d["radius"]))
    raise DomainError(f"unknown shape kind {kind!r}")


@dataclass(frozen=True)
class LatticeDomain:
    """Sites, bonds, and unit cells of the epsilon-grid inside a shape.

    Integer grid coordinates ``c`` correspond to positions ``c * epsilon``.
    Bonds are stored once with canonical orientation (lexicographically
    smaller endpoint first); cells are indexed by their lower-left corner.
    ``cell_corners`` lists site indices counterclockwise from the lower
    left: (i, i+e1, i+e1+e2, i+e2). ``cell_bonds`` lists the bond indices
    (bottom, right, top, left) of each cell.
    """

    epsilon: float
    shape: Shape
    site_coords: np.ndarray      # (n_sites, 2) int64
    bonds: np.ndarray            # (n_bonds, 2) int64 site indices, canonical
    bond_horizontal: np.ndarray  # (n_bonds,) bool, True for +e1 bonds
    cell_coords: np.ndarray      # (n_cells, 2) int64 lower-left corners
    cell_corners: np.ndarray     # (n_cells, 4) int64 site indices, CCW
    cell_bonds: np.ndarray       # (n_cells, 4) int64 bond indices (b, r, t, l)
    boundary_mask: np.ndarray    # (n_sites,) bool
    _site_lookup: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def n_sites(self) -> int:
        return len(self.site_coords)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def n_cells(self) -> int:
        return len(self.cell_coords)

    @property
    def site_positions(self) -> np.ndarray:
        return self.site_coords * self.epsilon

    @property
    def cell_centers(self) -> np.ndarray:
        return (self.cell_coords + 0.5) * self.epsilon

    @property
    def boundary_sites(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    def site_index(self, coord: tuple[int, int]) -> int:
        """Index of the site with the given integer grid coordinate."""
        try:
            return self._site_lookup[tuple(coord)]
        except KeyError:
            raise KeyError(f"no site at grid coordinate {tuple(coord)}") from None

    def has_site(self, coord: tuple[int, int]) -> bool:
        return tuple(coord) in self._site_lookup


def build_domain(shape: Shape, epsilon: float) -> LatticeDomain:
    """Construct the lattice domain for a shape at spacing ``epsilon``.

    Enumeration of sites, bonds, and cells is deterministic (lexicographic
    in integer grid coordinates).
    """
    if epsilon <= 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if epsilon >= shape.min_extent:
        raise DomainError(
            f"epsilon={epsilon} is not smaller than the shape extent {shape.min_extent}"
        )

    x0, y0, x1, y1 = shape.bounds
    a_lo = int(np.floor(x0 / epsilon)) - 1
    a_hi = int(np.ceil(x1 / epsilon)) + 1
    b_lo = int(np.floor(y0 / epsilon)) - 1
    b_hi = int(np.ceil(y1 / epsilon)) + 1

    aa, bb = np.meshgrid(
        np.arange(a_lo, a_hi, dtype=np.int64),
        np.arange(b_lo, b_hi, dtype=np.int64),
        indexing="ij",
    )
    cand = np.column_stack([aa.ravel(), bb.ravel()])

    # Cell retained iff all four corners lie in the closed shape.
    keep = np.ones(len(cand), dtype=bool)
    for da, db in ((0, 0), (1, 0), (1, 1), (0, 1)):
        corner = (cand + np.array([da, db])) * epsilon
        keep &= shape.contains(corner)
    cells = cand[keep]
    if len(cells) == 0:
        raise DomainError("no cell fits inside the shape at this epsilon (empty domain)")

    order = np.lexsort((cells[:, 1], cells[:, 0]))
    cells = cells[order]
    cell_set = {(int(a), int(b)) for a, b in cells}

    # Sites: union of cell corners, lexicographic order.
    corners = np.concatenate(
        [cells + np.array(d) for d in ((0, 0), (1, 0), (1, 1), (0, 1))]
    )
    site_coords = np.unique(corners, axis=0)
    order = np.lexsort((site_coords[:, 1], site_coords[:, 0]))
    site_coords = site_coords[order]
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(site_coords)}

    # Bonds: an axis edge exists iff one of its two flanking cells is retained.
    bond_list = []
    horiz_list = []
    for idx, (a, b) in enumerate(site_coords):
        a, b = int(a), int(b)
        if (a + 1, b) in lookup and ((a, b) in cell_set or (a, b - 1) in cell_set):
            bond_list.append((idx, lookup[(a + 1, b)]))
            horiz_list.append(True)
        if (a, b + 1) in lookup and ((a, b) in cell_set or (a - 1, b) in cell_set):
            bond_list.append((idx, lookup[(a, b + 1)]))
            horiz_list.append(False)
    bonds = np.array(bond_list, dtype=np.int64).reshape(-1, 2)
    bond_horizontal = np.array(horiz_list, dtype=bool)
    bond_lookup = {(int(i), int(j)): k for k, (i, j) in enumerate(bonds)}

    cell_corners = np.empty((len(cells), 4), dtype=np.int64)
    cell_bonds = np.empty((len(cells), 4), dtype=np.int64)
    for k, (a, b) in enumerate(cells):
        a, b = int(a), int(b)
        s00 = lookup[(a, b)]
        s10 = lookup[(a + 1, b)]
        s11 = lookup[(a + 1, b + 1)]
        s01 = lookup[(a, b + 1)]
        cell_corners[k] = (s00, s10, s11, s01)
        cell_bonds[k] = (
            bond_lookup[(s00, s10)],  # bottom
            bond_lookup[(s10, s11)],  # right
            bond_lookup[(s01, s11)],  # top
            bond_lookup[(s00, s01)],  # left
        )

    counts = np.bincount(bonds.ravel(), minlength=len(site_coords))
    boundary_mask = counts < 4

    return LatticeDomain(
        epsilon=float(epsilon),
        shape=shape,
        site_coords=site_coords,
        bonds=bonds,
        bond_horizontal=bond_horizontal,
        cell_coords=cells,
        cell_corners=cell_corners,
        cell_bonds=cell_bonds,
        boundary_mask=boundary_mask,
        _site_lookup=lookup,
    )


def cell_triangles(domain: LatticeDomain, cell: int) -> tuple[np.ndarray, np.ndarray]:
    """The two triangles splitting cell ``i + eps*Q`` along its main diagonal.

    Returns (lower, upper) as (3, 2) vertex arrays: the lower triangle has
    vertices (i, i+eps*e1, i+eps*(e1+e2)), the upper one
    (i, i+eps*(e1+e2), i+eps*e2); they share the diagonal and partition the
    cell up to a null set.
    """
    if not 0 <= cell < domain.n_cells:
        raise IndexError(f"cell index {cell} out of range [0, {domain.n_cells})")
    eps = domain.epsilon
    i = domain.cell_coords[cell] * eps
    e1 = np.array([eps, 0.0])
    e2 = np.array([0.0, eps])
    lower = np.array([i, i + e1, i + e1 + e2])
    upper = np.array([i, i + e1 + e2, i + e2])
    return lower, upper
