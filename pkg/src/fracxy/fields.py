"""Phase fields, spin fields, interpolations, and string-defect extraction.

A scalar field assigns one phase per site; a spin field one unit vector.
Spin fields extend to the covered region by piecewise affine interpolation
on the two-triangle split of each cell. A bond is a jump pair (for well
count n) when its phase difference is farther than pi/n from 2*pi*Z; cells
touching a jump pair are jump cells, and the jump-aware interpolation is
piecewise constant there. Each jump bond is crossed by one edge of the
dual lattice, and the union of those dual segments forms the polylines of
the string defects, whose total length is epsilon times the bond count
(the anisotropic 1-norm length).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeDomain
from .potentials import angle_dist


def _lsum(values: np.ndarray) -> float:
    """Sum in extended precision (x87 long double accumulator)."""
    return float(np.sum(values, dtype=np.longdouble))


@dataclass
class ScalarField:
    """One real phase (radians) per lattice site."""

    domain: LatticeDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n_sites,):
            raise ValueError(
                f"expected {self.domain.n_sites} values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("phase field contains non-finite values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.domain, self.values.copy())


@dataclass
class SpinField:
    """One unit 2-vector per lattice site."""

    domain: LatticeDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n_sites, 2):
            raise ValueError(
                f"expected ({self.domain.n_sites}, 2) values, got {self.values.shape}"
            )
        norms = np.hypot(self.values[:, 0], self.values[:, 1])
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("spin field contains non-unit vectors")


def exp_map(phi: ScalarField, multiplier: int = 1) -> SpinField:
    """Site-wise (cos(m*phi), sin(m*phi))."""
    if multiplier < 1:
        raise ValueError(f"multiplier must be a positive integer, got {multiplier}")
    t = multiplier * phi.values
    return SpinField(phi.domain, np.column_stack([np.cos(t), np.sin(t)]))


def bond_differences(phi: ScalarField) -> np.ndarray:
    """phi(j) - phi(i) over canonically oriented bonds."""
    b = phi.domain.bonds
    return phi.values[b[:, 1]] - phi.values[b[:, 0]]


@dataclass
class StringComponent:
    """One connected polyline of dual segments."""

    n_bonds: int
    endpoints: list  # [(x, y), ...] degree-one dual vertices; empty for loops


@dataclass
class StringSet:
    """Jump pairs of a phase field and the dual polylines they trace."""

    domain: LatticeDomain
    n: int
    jump_bonds: np.ndarray        # indices into domain.bonds
    jump_cell_mask: np.ndarray    # (n_cells,) bool
    dual_segments: np.ndarray     # (k, 2, 2) positions in domain units
    length_1norm: float
    components: list = field(default_factory=list)


def _dual_segments(domain: LatticeDomain, bond_idx: np.ndarray) -> np.ndarray:
    """Dual lattice edge crossing each given bond (length epsilon each)."""
    eps = domain.epsilon
    segs = np.empty((len(bond_idx), 2, 2), dtype=float)
    coords = domain.site_coords
    for out, k in enumerate(bond_idx):
        i, j = domain.bonds[k]
        a, b = coords[i]
        if domain.bond_horizontal[k]:
            mid = np.array([a + 0.5, float(b)])
            segs[out, 0] = (mid + [0.0, -0.5]) * eps
            segs[out, 1] = (mid + [0.0, +0.5]) * eps
        else:
            mid = np.array([float(a), b + 0.5])
            segs[out, 0] = (mid + [-0.5, 0.0]) * eps
            segs[out, 1] = (mid + [+0.5, 0.0]) * eps
    return segs


def _connected_components(segs: np.ndarray, eps: float) -> list:
    """Group dual segments into polylines by shared dual vertices."""
    # Dual vertices have half-integer grid coordinates: key them exactly.
    def key(p):
        return (int(round(2 * p[0] / eps)), int(round(2 * p[1] / eps)))

    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    seg_keys = []
    for s in segs:
        ka, kb = key(s[0]), key(s[1])
        seg_keys.append((ka, kb))
        for k in (ka, kb):
            parent.setdefault(k, k)
        union(ka, kb)

    groups: dict = {}
    degree: dict = {}
    for ka, kb in seg_keys:
        root = find(ka)
        groups.setdefault(root, []).append((ka, kb))
        degree[ka] = degree.get(ka, 0) + 1
        degree[kb] = degree.get(kb, 0) + 1

    components = []
    for root in sorted(groups):
        edges = groups[root]
        verts = {v for e in edges for v in e}
        ends = sorted(v for v in verts if degree[v] == 1)
        endpoints = [(0.5 * v[0] * eps, 0.5 * v[1] * eps) for v in ends]
        components.append(StringComponent(n_bonds=len(edges), endpoints=endpoints))
    return components


def jump_pairs(phi: ScalarField, n: int) -> StringSet:
    """Bonds whose phase difference is farther than pi/n from 2*pi*Z."""
    if n < 1:
        raise ValueError(f"well count n must be >= 1, got {n}")
    d = bond_differences(phi)
    jumping = angle_dist(d) > np.pi / n
    jump_idx = np.flatnonzero(jumping)
    cell_mask = np.any(jumping[phi.domain.cell_bonds], axis=1)
    segs = _dual_segments(phi.domain, jump_idx)
    return StringSet(
        domain=phi.domain,
        n=n,
        jump_bonds=jump_idx,
        jump_cell_mask=cell_mask,
        dual_segments=segs,
        length_1norm=phi.domain.epsilon * len(jump_idx),
        components=_connected_components(segs, phi.domain.epsilon),
    )


def extract_strings(strings: StringSet) -> dict:
    """Summary of the string defects: total 1-norm length and components."""
    return {
        "length_1norm": strings.length_1norm,
        "n_components": len(strings.components),
        "components": [
            {"endpoints": [list(p) for p in c.endpoints], "n_bonds": c.n_bonds}
            for c in strings.components
        ],
    }


@dataclass
class InterpolatedField:
    """Piecewise affine extension of site values over the covered region.

    ``tri_grads[c, t]`` is the constant (d, 2) gradient on triangle t of
    cell c (t=0 lower, t=1 upper). In jump-cell mode the field is instead
    constant on each jump cell, equal to the value at the cell's lower
    left corner, and the stored gradient there is zero.
    """

    domain: LatticeDomain
    mode: str                   # "affine" | "jump_cell_constant"
    values: np.ndarray          # (n_sites, d) corner values
    tri_grads: np.ndarray       # (n_cells, 2, d, 2)
    jump_cell_mask: np.ndarray  # (n_cells,) bool

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Field values at points inside the covered region."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        eps = self.domain.epsilon
        lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(self.domain.cell_coords)}
        out = np.empty((len(pts), self.values.shape[1]))
        for r, p in enumerate(pts):
            g = p / eps
            a, b = int(np.floor(g[0])), int(np.floor(g[1]))
            # Points on the far edge of the last cell belong to that cell.
            if (a, b) not in lookup and (a - 1, b) in lookup and np.isclose(g[0], a):
                a -= 1
            if (a, b) not in lookup and (a, b - 1) in lookup and np.isclose(g[1], b):
                b -= 1
            if (a, b) not in lookup and (a - 1, b - 1) in lookup \
                    and np.isclose(g[0], a) and np.isclose(g[1], b):
                a, b = a - 1, b - 1
            if (a, b) not in lookup:
                raise ValueError(f"point {p} lies outside the covered region")
            c = lookup[(a, b)]
            s00, s10, s11, s01 = self.domain.cell_corners[c]
            if self.mode == "jump_cell_constant" and self.jump_cell_mask[c]:
                out[r] = self.values[s00]
                continue
            xl, yl = g[0] - a, g[1] - b
            if xl >= yl:  # lower triangle
                grad = self.tri_grads[c, 0]
                out[r] = self.values[s00] + grad @ (p - self.domain.site_coords[s00] * eps)
            else:
                grad = self.tri_grads[c, 1]
                out[r] = self.values[s00] + grad @ (p - self.domain.site_coords[s00] * eps)
        return out


def _affine_gradients(domain: LatticeDomain, vals: np.ndarray) -> np.ndarray:
    """Per-triangle gradients of the piecewise affine interpolation."""
    eps = domain.epsilon
    s00 = domain.cell_corners[:, 0]
    s10 = domain.cell_corners[:, 1]
    s11 = domain.cell_corners[:, 2]
    s01 = domain.cell_corners[:, 3]
    grads = np.empty((domain.n_cells, 2, vals.shape[1], 2))
    grads[:, 0, :, 0] = (vals[s10] - vals[s00]) / eps
    grads[:, 0, :, 1] = (vals[s11] - vals[s10]) / eps
    grads[:, 1, :, 0] = (vals[s11] - vals[s01]) / eps
    grads[:, 1, :, 1] = (vals[s01] - vals[s00]) / eps
    return grads


def interpolate_affine(w: SpinField) -> InterpolatedField:
    """Piecewise affine interpolation matching the spins at all corners."""
    return InterpolatedField(
        domain=w.domain,
        mode="affine",
        values=w.values,
        tri_grads=_affine_gradients(w.domain, w.values),
        jump_cell_mask=np.zeros(w.domain.n_cells, dtype=bool),
    )


def interpolate_u_hat(phi: ScalarField, n: int) -> InterpolatedField:
    """Jump-aware interpolation of exp(i*phi).

    Affine away from the jump cells of phi (for well count n); constant on
    each open jump cell, equal to the spin at the cell's lower-left site.
    """
    u = exp_map(phi, 1)
    strings = jump_pairs(phi, n)
    grads = _affine_gradients(phi.domain, u.values)
    grads[strings.jump_cell_mask] = 0.0
    return InterpolatedField(
        domain=phi.domain,
        mode="jump_cell_constant",
        values=u.values,
        tri_grads=grads,
        jump_cell_mask=strings.jump_cell_mask,
    )


def dirichlet_energy(interp: InterpolatedField, region=None) -> float:
    """(1/2) integral of |grad|^2 over non-jump triangles, exact per triangle.

    ``region``, when given, must expose ``contains(points)``; a triangle is
    included when all three of its corner sites lie in the region.
    """
    domain = interp.domain
    tri_area = 0.5 * domain.epsilon ** 2
    sq = np.sum(interp.tri_grads ** 2, axis=(2, 3))  # (n_cells, 2)
    include = np.ones((domain.n_cells, 2), dtype=bool)
    include[interp.jump_cell_mask] = False
    if region is not None:
        site_in = region.contains(domain.site_positions)
        cc = domain.cell_corners
        include[:, 0] &= site_in[cc[:, 0]] & site_in[cc[:, 1]] & site_in[cc[:, 2]]
        include[:, 1] &= site_in[cc[:, 0]] & site_in[cc[:, 2]] & site_in[cc[:, 3]]
    return 0.5 * tri_area * _lsum(sq[include])
