"""Discrete vorticity and the flat norm of atomic vorticity measures.

The projection P sends an angle to its nearest multiple of 2*pi (smallest
on ties); the elastic difference of a bond is the phase difference minus
that projection, an antisymmetric quantity valued in (-pi, pi]. Summing
the four counterclockwise elastic differences around a cell and dividing
by 2*pi gives the integer cell vorticity, always in {-1, 0, 1}. Nonzero
cells, weighted and placed at cell centers, form the vorticity measure.

The flat norm of an atomic measure is computed as pi times the minimal
total length of a connection pairing positive unit charges with negative
ones or with the domain boundary (exact min-cost assignment). A grid
linear program for the dual formulation, maximizing the pairing against
1-Lipschitz test functions that vanish on the boundary, serves as an
independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .assignment import solve_assignment
from .fields import ScalarField
from .lattice import Disk, Rectangle, Shape

TWO_PI = 2.0 * np.pi
# Relative slack for detecting exact ties in the nearest-multiple projection.
_TIE_RTOL = 1e-12


class TopologyError(ValueError):
    """Raised for invalid regions, non-neighbor bonds, or unsupported domains."""


def project_P(t):
    """Nearest multiple of 2*pi; the smaller one on exact ties."""
    t = np.asarray(t, dtype=float)
    k = np.round(t / TWO_PI)
    r = t - TWO_PI * k
    tie = np.abs(np.abs(r) - np.pi) <= _TIE_RTOL * np.maximum(1.0, np.abs(t))
    # At distance exactly pi the two candidates are 2*pi*k and its neighbor
    # on the side of r; pick the smaller of the two.
    k = k - (tie & (r < 0))
    out = TWO_PI * k
    return out if out.ndim else float(out)


def elastic_diff(psi: ScalarField, bond: tuple[int, int]) -> float:
    """Signed distance of the bond phase difference from 2*pi*Z.

    ``bond`` is an ordered pair of site indices of nearest neighbors.
    Antisymmetric under orientation swap, exactly.
    """
    i, j = bond
    ci = psi.domain.site_coords[i]
    cj = psi.domain.site_coords[j]
    step = cj - ci
    if sorted(np.abs(step)) != [0, 1]:
        raise TopologyError(f"sites {tuple(ci)} and {tuple(cj)} are not nearest neighbors")
    d = psi.values[j] - psi.values[i]
    if np.all(ci <= cj):
        return float(d - project_P(d))
    return float(d + project_P(-d))


def elastic_diffs_canonical(psi: ScalarField) -> np.ndarray:
    """Elastic differences along all canonically oriented bonds."""
    b = psi.domain.bonds
    d = psi.values[b[:, 1]] - psi.values[b[:, 0]]
    return d - project_P(d)


def cell_vorticities(psi: ScalarField) -> np.ndarray:
    """Integer vorticity of every cell (counterclockwise circulation / 2*pi)."""
    de = elastic_diffs_canonical(psi)
    cb = psi.domain.cell_bonds
    # Counterclockwise: bottom and right bonds along canonical orientation,
    # top and left bonds against it.
    circ = de[cb[:, 0]] + de[cb[:, 1]] - de[cb[:, 2]] - de[cb[:, 3]]
    alpha = np.round(circ / TWO_PI).astype(np.int64)
    assert np.all(np.abs(alpha) <= 1)
    return alpha


def cell_vorticity(psi: ScalarField, cell: int) -> int:
    """Vorticity of one cell; always in {-1, 0, 1}."""
    if not 0 <= cell < psi.domain.n_cells:
        raise IndexError(f"cell index {cell} out of range [0, {psi.domain.n_cells})")
    return int(cell_vorticities(psi)[cell])


@dataclass
class VorticityMeasure:
    """Finite atomic measure pi * sum_i d_i * delta_{x_i} with integer weights."""

    positions: np.ndarray  # (k, 2) in domain units
    weights: np.ndarray    # (k,) nonzero integers
    shape: Shape           # supplies boundary distances for the flat norm

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.int64).reshape(-1)
        if len(self.positions) != len(self.weights):
            raise ValueError("positions and weights must have equal length")
        if np.any(self.weights == 0):
            raise ValueError("atom weights must be nonzero integers")

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    @property
    def total_variation(self) -> int:
        return int(np.sum(np.abs(self.weights)))

    def to_dict(self) -> dict:
        return {
            "atoms": [
                {"x": float(x), "y": float(y), "d": int(d)}
                for (x, y), d in zip(self.positions, self.weights)
            ],
            "domain": self.shape.to_dict(),
        }


def vorticity_measure(psi: ScalarField) -> VorticityMeasure:
    """Atoms at the centers of cells with nonzero vorticity."""
    alpha = cell_vorticities(psi)
    hot = np.flatnonzero(alpha)
    return VorticityMeasure(
        positions=psi.domain.cell_centers[hot],
        weights=alpha[hot],
        shape=psi.domain.shape,
    )


def _region_cell_mask(domain, region) -> np.ndarray:
    if isinstance(region, np.ndarray):
        mask = np.asarray(region, dtype=bool)
        if mask.shape != (domain.n_cells,):
            raise TopologyError(
                f"cell mask must have shape ({domain.n_cells},), got {mask.shape}"
            )
        return mask
    site_in = region.contains(domain.site_positions)
    return np.all(site_in[domain.cell_corners], axis=1)


def stokes_check(psi: ScalarField, region) -> tuple[float, float]:
    """Both sides of the discrete circulation identity on a cell region.

    ``region`` is a boolean cell mask or an object with ``contains``; the
    retained cells must form a simply connected union. Returns the sum of
    elastic differences along the counterclockwise boundary cycle and
    2*pi times the total vorticity of the retained cells. The two agree
    up to summation roundoff.
    """
    domain = psi.domain
    mask = _region_cell_mask(domain, region)
    if not np.any(mask):
        raise TopologyError("region contains no cells")
    cell_set = {(int(a), int(b)) for a, b in domain.cell_coords[mask]}

    # Directed boundary edges, region on the left (counterclockwise walk).
    out_edge: dict = {}
    n_edges = 0
    for (a, b) in cell_set:
        for tail, head, nbr in (
            ((a, b), (a + 1, b), (a, b - 1)),          # bottom
            ((a + 1, b), (a + 1, b + 1), (a + 1, b)),  # right
            ((a + 1, b + 1), (a, b + 1), (a, b + 1)),  # top
            ((a, b + 1), (a, b), (a - 1, b)),          # left
        ):
            if nbr not in cell_set:
                if tail in out_edge:
                    raise TopologyError("region is not simply connected (pinch point)")
                out_edge[tail] = head
                n_edges += 1

    start = next(iter(out_edge))
    cycle = [start]
    cur = out_edge[start]
    while cur != start:
        cycle.append(cur)
        if cur not in out_edge:
            raise TopologyError("boundary walk broke off; region is not simply connected")
        cur = out_edge[cur]
    if len(cycle) != n_edges:
        raise TopologyError("region is not simply connected (multiple boundary cycles)")

    idx = [domain.site_index(c) for c in cycle]
    boundary_sum = 0.0
    for k in range(len(idx)):
        boundary_sum += elastic_diff(psi, (idx[k], idx[(k + 1) % len(idx)]))

    alpha = cell_vorticities(psi)
    interior_sum = TWO_PI * float(np.sum(alpha[mask]))
    return boundary_sum, interior_sum


def _check_convex_shape(shape: Shape):
    if not isinstance(shape, (Rectangle, Disk)):
        raise TopologyError(f"flat norm requires a rectangle or disk domain, got {shape!r}")


def _expand_particles(mu: VorticityMeasure) -> tuple[np.ndarray, np.ndarray]:
    pos, neg = [], []
    for (x, y), d in zip(mu.positions, mu.weights):
        target = pos if d > 0 else neg
        for _ in range(abs(int(d))):
            target.append((x, y))
    return np.array(pos).reshape(-1, 2), np.array(neg).reshape(-1, 2)


def flat_norm(mu: VorticityMeasure) -> float:
    """pi times the minimal connection length of the measure.

    Each unit of charge is a particle; positives pair with negatives at
    Euclidean cost or exit through the nearest boundary point, and the
    pairing is solved exactly by min-cost assignment.
    """
    _check_convex_shape(mu.shape)
    if mu.n_atoms == 0:
        return 0.0
    pos, neg = _expand_particles(mu)
    p, q = len(pos), len(neg)
    size = p + q
    cost = np.zeros((size, size))
    if p and q:
        cost[:p, :q] = np.hypot(
            pos[:, None, 0] - neg[None, :, 0], pos[:, None, 1] - neg[None, :, 1]
        )
    if p:
        cost[:p, q:] = mu.shape.boundary_distance(pos)[:, None]
    if q:
        cost[p:, :q] = mu.shape.boundary_distance(neg)[None, :]
    _, total = solve_assignment(cost)
    return np.pi * total


def flat_distance(mu1: VorticityMeasure, mu2: VorticityMeasure) -> float:
    """Flat norm of mu1 - mu2; both measures must share the domain shape."""
    if mu1.shape != mu2.shape:
        raise TopologyError("measures live on different domains")
    if mu1.n_atoms == 0 and mu2.n_atoms == 0:
        return 0.0
    positions = np.concatenate([mu1.positions, mu2.positions])
    weights = np.concatenate([mu1.weights, -mu2.weights])
    keep = weights != 0
    if not np.any(keep):
        return 0.0
    return flat_norm(VorticityMeasure(positions[keep], weights[keep], mu1.shape))


def flat_norm_lp_oracle(mu: VorticityMeasure, grid: int = 48) -> float:
    """Brute-force dual value: grid LP over 1-Lipschitz test functions.

    Maximizes pi * sum_i d_i * eta(x_i) over grid functions eta that vanish
    on (and outside) the domain boundary, with |eta(p) - eta(q)| <= |p - q|
    enforced on horizontal, vertical, and diagonal grid neighbors. Atom
    values are bilinearly interpolated, keeping the program linear.
    """
    _check_convex_shape(mu.shape)
    if mu.n_atoms == 0:
        return 0.0
    if mu.total_variation > 6:
        raise TopologyError("oracle supports at most 6 units of charge")
    if grid > 64:
        raise TopologyError("oracle grid is capped at 64x64")

    x0, y0, x1, y1 = mu.shape.bounds
    nx = ny = int(grid)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]

    node_id = -np.ones((nx + 1, ny + 1), dtype=int)
    free = []
    if isinstance(mu.shape, Rectangle):
        interior = lambda px, py: (x0 < px < x1) and (y0 < py < y1)
    else:
        cx, cy = mu.shape.center
        r = mu.shape.radius
        interior = lambda px, py: (px - cx) ** 2 + (py - cy) ** 2 < r * r
    for a in range(nx + 1):
        for b in range(ny + 1):
            if 0 < a < nx and 0 < b < ny and interior(xs[a], ys[b]):
                node_id[a, b] = len(free)
                free.append((a, b))
    n_free = len(free)
    if n_free == 0:
        return 0.0

    # Objective: maximize sum_i d_i * bilinear(eta, x_i).
    c = np.zeros(n_free)
    for (px, py), d in zip(mu.positions, mu.weights):
        a = min(int((px - x0) / hx), nx - 1)
        b = min(int((py - y0) / hy), ny - 1)
        tx = (px - xs[a]) / hx
        ty = (py - ys[b]) / hy
        for da, db, w in (
            (0, 0, (1 - tx) * (1 - ty)),
            (1, 0, tx * (1 - ty)),
            (0, 1, (1 - tx) * ty),
            (1, 1, tx * ty),
        ):
            nid = node_id[a + da, b + db]
            if nid >= 0:
                c[nid] += d * w

    # Lipschitz constraints |eta(p) - eta(q)| <= |p - q| on neighbor pairs.
    rows, cols, vals, rhs = [], [], [], []

    def add_pair(pa, pb, dist):
        ia = node_id[pa]
        ib = node_id[pb]
        if ia < 0 and ib < 0:
            return
        r = len(rhs)
        if ia >= 0:
            rows.append(r)
            cols.append(ia)
            vals.append(1.0)
        if ib >= 0:
            rows.append(r)
            cols.append(ib)
            vals.append(-1.0)
        rhs.append(dist)

    diag = float(np.hypot(hx, hy))
    for a in range(nx + 1):
        for b in range(ny + 1):
            if a < nx:
                add_pair((a, b), (a + 1, b), hx)
            if b < ny:
                add_pair((a, b), (a, b + 1), hy)
            if a < nx and b < ny:
                add_pair((a, b), (a + 1, b + 1), diag)
            if a < nx and b > 0:
                add_pair((a, b), (a + 1, b - 1), diag)

    n_rows = len(rhs)
    A_half = sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_free))
    A = sparse.vstack([A_half, -A_half])
    b_ub = np.concatenate([rhs, rhs])

    diam = mu.shape.diameter
    res = linprog(
        -c, A_ub=A, b_ub=b_ub, bounds=[(-diam, diam)] * n_free, method="highs"
    )
    if not res.success:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return float(np.pi * (-res.fun))
