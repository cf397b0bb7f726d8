"""Discrete Green's functions for the weighted operator d/d(conj z) (1/rho) d/dz.

The operator expands into a real divergence-form part and an imaginary
rotational part,

    P u = 1/4 [ dx((1/rho) dx u) + dy((1/rho) dy u) ]
        + i/4 [ dy((1/rho) dx u) - dx((1/rho) dy u) ],

both of which are discretized to second order: harmonic-mean face
coefficients for the divergence part, centered differences for the
rotational part, Dirichlet rows eliminated.  For rho = 1 the rotational
coefficients cancel entrywise and the matrix is exactly one quarter of the
standard Laplacian stencil.

The discrete Green's function solves  P G = -(pi/2) delta_h  with delta_h
the grid delta (1/cell-area at the snapped source node).  This
normalization makes the rho = 1 solution converge to -ln|z - w| plus a
harmonic function, since the Laplacian of -ln|z - w| is -2 pi delta and
P reduces to a quarter Laplacian.

Supported grids are Cartesian rectangles and polar annuli (uniform periodic
angles, metric terms folded into the face coefficients).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError, SolverError, WeightError
from .geometry import Annulus, Domain, Rectangle
from .weights import Weight

__all__ = [
    "GridSpec",
    "DiscreteOperator",
    "DiscreteGreen",
    "discretize",
    "solve_green",
    "grid_mixed_derivative",
    "solve_mixed",
    "rectangle_green_series",
]

# Direct sparse factorization up to this many unknowns; iterative beyond.
DIRECT_SOLVE_LIMIT = 200 * 200


@dataclass(frozen=True)
class GridSpec:
    """Interior-node grid on a rectangle (Cartesian) or annulus (polar).

    ``shape`` counts interior nodes per axis: (nx, ny) for rectangles,
    (n_radial, n_angular) for annuli.  The angular direction is periodic, so
    all of its nodes are unknowns and the count must be even and >= 16.
    """

    domain: Domain
    shape: tuple

    def __post_init__(self):
        n1, n2 = self.shape
        if n1 != int(n1) or n2 != int(n2):
            raise ParameterError("grid resolution must be integral")
        object.__setattr__(self, "shape", (int(n1), int(n2)))
        n1, n2 = self.shape
        if n1 < 8 or n2 < 8:
            raise ParameterError("grid resolution must be at least (8, 8)")
        if isinstance(self.domain, Rectangle):
            pass
        elif isinstance(self.domain, Annulus):
            if n2 % 2 != 0 or n2 < 16:
                raise ParameterError("annulus grids need an even angular count >= 16")
        else:
            raise ParameterError(f"grids are defined on rectangles and annuli, not {self.domain.kind}")

    @property
    def is_polar(self) -> bool:
        return isinstance(self.domain, Annulus)

    @property
    def spacing(self) -> tuple:
        n1, n2 = self.shape
        if self.is_polar:
            hr = (self.domain.outer - self.domain.inner) / (n1 + 1)
            ht = 2.0 * math.pi / n2
            return hr, ht
        hx = (self.domain.x1 - self.domain.x0) / (n1 + 1)
        hy = (self.domain.y1 - self.domain.y0) / (n2 + 1)
        return hx, hy

    @cached_property
    def axes(self) -> tuple:
        """Coordinate arrays including the boundary layer on non-periodic axes."""
        n1, n2 = self.shape
        h1, h2 = self.spacing
        if self.is_polar:
            radii = self.domain.inner + h1 * np.arange(n1 + 2)
            angles = h2 * np.arange(n2)
            return radii, angles
        xs = self.domain.x0 + h1 * np.arange(n1 + 2)
        ys = self.domain.y0 + h2 * np.arange(n2 + 2)
        return xs, ys

    def node_point(self, i: int, j: int) -> complex:
        """Complex coordinate of interior node (i, j)."""
        a1, a2 = self.axes
        if self.is_polar:
            return a1[i + 1] * complex(math.cos(a2[j]), math.sin(a2[j]))
        return complex(a1[i + 1], a2[j + 1])

    def interior_points(self) -> np.ndarray:
        n1, n2 = self.shape
        a1, a2 = self.axes
        if self.is_polar:
            return a1[1:-1, None] * np.exp(1j * a2[None, :])
        return a1[1:-1, None] + 1j * a2[None, 1:-1]

    def snap_index(self, z: complex) -> tuple:
        """Indices of the interior node nearest to z."""
        z = complex(z)
        h1, h2 = self.spacing
        n1, n2 = self.shape
        if self.is_polar:
            i = int(round((abs(z) - self.domain.inner) / h1)) - 1
            j = int(round(math.atan2(z.imag, z.real) / h2)) % n2
            i = min(max(i, 0), n1 - 1)
            return i, j
        i = int(round((z.real - self.domain.x0) / h1)) - 1
        j = int(round((z.imag - self.domain.y0) / h2)) - 1
        return min(max(i, 0), n1 - 1), min(max(j, 0), n2 - 1)

    def margin_cells(self, idx: tuple) -> int:
        """Distance of a node from the eliminated boundary, in cells."""
        i, j = idx
        n1, n2 = self.shape
        m = min(i + 1, n1 - i)
        if not self.is_polar:
            m = min(m, j + 1, n2 - j)
        return m


def _full_weight_grid(grid: GridSpec, weight: Weight) -> np.ndarray:
    """rho sampled on interior plus boundary layers (angular axis has no layer)."""
    a1, a2 = grid.axes
    if grid.is_polar:
        pts = a1[:, None] * np.exp(1j * a2[None, :])
    else:
        pts = a1[:, None] + 1j * a2[None, :]
    rho = np.real(np.asarray(weight.value(pts), dtype=complex))
    if np.any(~np.isfinite(rho)) or np.any(rho <= 0):
        raise WeightError("weight must be finite and positive on every grid node")
    return rho


@dataclass(eq=False)
class DiscreteOperator:
    """Sparse discretization of the weighted operator over interior nodes."""

    grid: GridSpec
    weight: Weight
    matrix: sp.csr_matrix
    _lu: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Matrix action on a field sampled at interior nodes (shape grid.shape)."""
        return (self.matrix @ values.ravel()).reshape(self.grid.shape)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.size <= DIRECT_SOLVE_LIMIT:
            if self._lu is None:
                try:
                    self._lu = spla.splu(self.matrix.tocsc())
                except RuntimeError as exc:
                    raise SolverError(
                        f"sparse factorization failed on {self.size} unknowns: {exc}"
                    ) from exc
            return self._lu.solve(rhs)
        sol, info = spla.lgmres(self.matrix, rhs, rtol=1e-10, atol=0.0, maxiter=2000)
        if info != 0:
            raise SolverError(f"iterative solve did not converge (info={info})")
        return sol


def _assemble_rectangle(grid: GridSpec, rho: np.ndarray):
    nx, ny = grid.shape
    hx, hy = grid.spacing
    beta = 1.0 / rho  # on the full (nx+2, ny+2) grid

    # interior slabs of rho for face harmonic means
    c = rho[1:-1, 1:-1]
    face_xp = 2.0 / (c + rho[2:, 1:-1]) / hx**2
    face_xm = 2.0 / (c + rho[:-2, 1:-1]) / hx**2
    face_yp = 2.0 / (c + rho[1:-1, 2:]) / hy**2
    face_ym = 2.0 / (c + rho[1:-1, :-2]) / hy**2

    cross = 1.0 / (4.0 * hx * hy)
    rot_pp = (beta[1:-1, 2:] - beta[2:, 1:-1]) * cross
    rot_mp = (beta[:-2, 1:-1] - beta[1:-1, 2:]) * cross
    rot_pm = (beta[2:, 1:-1] - beta[1:-1, :-2]) * cross
    rot_mm = (beta[1:-1, :-2] - beta[:-2, 1:-1]) * cross

    div_entries = {
        (0, 0): -(face_xp + face_xm + face_yp + face_ym),
        (1, 0): face_xp,
        (-1, 0): face_xm,
        (0, 1): face_yp,
        (0, -1): face_ym,
    }
    rot_entries = {(1, 1): rot_pp, (-1, 1): rot_mp, (1, -1): rot_pm, (-1, -1): rot_mm}
    return div_entries, rot_entries


def _assemble_annulus(grid: GridSpec, rho: np.ndarray):
    nr, nt = grid.shape
    hr, ht = grid.spacing
    radii = grid.axes[0]  # length nr + 2
    r = radii[1:-1][:, None]  # interior radii, broadcast over angles
    beta = 1.0 / rho  # shape (nr+2, nt), periodic in the angle

    c = rho[1:-1, :]
    roll_p = np.roll(rho[1:-1, :], -1, axis=1)
    roll_m = np.roll(rho[1:-1, :], 1, axis=1)
    rp_half = radii[1:-1][:, None] + 0.5 * hr
    rm_half = radii[1:-1][:, None] - 0.5 * hr

    face_rp = rp_half * (2.0 / (c + rho[2:, :])) / (r * hr**2)
    face_rm = rm_half * (2.0 / (c + rho[:-2, :])) / (r * hr**2)
    face_tp = (2.0 / (c + roll_p)) / (r**2 * ht**2)
    face_tm = (2.0 / (c + roll_m)) / (r**2 * ht**2)

    # rotational term -(1/r) [ dr(beta u_t) - dt(beta u_r) ]
    cross = 1.0 / (4.0 * hr * ht)
    b_rp = beta[2:, :]
    b_rm = beta[:-2, :]
    b_tp = np.roll(beta[1:-1, :], -1, axis=1)
    b_tm = np.roll(beta[1:-1, :], 1, axis=1)
    rot_pp = -(b_rp - b_tp) * cross / r
    rot_mp = -(b_tp - b_rm) * cross / r
    rot_pm = -(b_tm - b_rp) * cross / r
    rot_mm = -(b_rm - b_tm) * cross / r

    div_entries = {
        (0, 0): -(face_rp + face_rm + face_tp + face_tm),
        (1, 0): face_rp,
        (-1, 0): face_rm,
        (0, 1): face_tp,
        (0, -1): face_tm,
    }
    rot_entries = {(1, 1): rot_pp, (-1, 1): rot_mp, (1, -1): rot_pm, (-1, -1): rot_mm}
    return div_entries, rot_entries


def discretize(grid: GridSpec, weight: Weight) -> DiscreteOperator:
    """Second-order sparse discretization of the weighted operator.

    The divergence part uses harmonic-mean face coefficients of 1/rho; the
    rotational part uses centered differences of nodal 1/rho.  Rows touch at
    most nine unknowns.  For constant weights the rotational coefficients are
    exactly zero and the matrix is real.
    """
    rho = _full_weight_grid(grid, weight)
    if grid.is_polar:
        div_entries, rot_entries = _assemble_annulus(grid, rho)
    else:
        div_entries, rot_entries = _assemble_rectangle(grid, rho)

    n1, n2 = grid.shape
    size = n1 * n2
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    row_index = (ii * n2 + jj).ravel()

    rotational = any(np.max(np.abs(v)) > 0 for v in rot_entries.values())
    dtype = complex if rotational else float

    rows, cols, data = [], [], []

    def add(offset, coeff, scale):
        di, dj = offset
        ti = ii + di
        tj = jj + dj
        if grid.is_polar:
            tj = tj % n2
            mask = (ti >= 0) & (ti < n1)
        else:
            mask = (ti >= 0) & (ti < n1) & (tj >= 0) & (tj < n2)
        rows.append(row_index.reshape(n1, n2)[mask])
        cols.append((ti * n2 + tj)[mask])
        data.append((scale * coeff)[mask].astype(dtype))

    for offset, coeff in div_entries.items():
        add(offset, coeff, 0.25)
    if rotational:
        for offset, coeff in rot_entries.items():
            add(offset, coeff, 0.25j)

    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    ).tocsr()
    matrix.sum_duplicates()
    return DiscreteOperator(grid=grid, weight=weight, matrix=matrix)


@dataclass(eq=False)
class DiscreteGreen:
    """Field of the discrete Green's function for one snapped source."""

    operator: DiscreteOperator
    source: complex
    source_index: tuple
    values: np.ndarray  # shape grid.shape; boundary values are implicitly zero
    solve_stats: dict = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.operator.grid

    def value_at(self, z: complex):
        i, j = self.grid.snap_index(z)
        return self.values[i, j]


def solve_green(op: DiscreteOperator, source: complex) -> DiscreteGreen:
    """Solve  P G = -(pi/2) delta_h  for a source snapped to the nearest node.

    The source must keep at least two cells of margin from the eliminated
    boundary so derivative stencils around it stay on the grid.  The result
    carries solver statistics (unknowns, linear residual, wall time, method).
    """
    grid = op.grid
    idx = grid.snap_index(source)
    if grid.margin_cells(idx) < 2:
        raise ParameterError(
            f"source {source} snaps to node {idx}, closer than two cells to the boundary"
        )
    snapped = grid.node_point(*idx)
    h1, h2 = grid.spacing
    if grid.is_polar:
        cell_area = abs(snapped) * h1 * h2
    else:
        cell_area = h1 * h2
    rhs = np.zeros(op.size, dtype=op.matrix.dtype)
    rhs[idx[0] * grid.shape[1] + idx[1]] = -(math.pi / 2.0) / cell_area
    t0 = time.perf_counter()
    sol = op.solve(rhs)
    stats = {
        "unknowns": op.size,
        "residual": float(np.linalg.norm(op.matrix @ sol - rhs) / np.linalg.norm(rhs)),
        "solve_seconds": time.perf_counter() - t0,
        "method": "direct" if op.size <= DIRECT_SOLVE_LIMIT else "iterative",
    }
    return DiscreteGreen(operator=op, source=snapped, source_index=idx,
                         values=sol.reshape(grid.shape), solve_stats=stats)


# ---------------------------------------------------------------------------
# Mixed derivative from shifted solves
# ---------------------------------------------------------------------------


def _dz_on_grid(sol: DiscreteGreen, z_index: tuple) -> complex:
    """d/dz of the solution field at an interior node via centered differences."""
    grid = sol.grid
    i, j = z_index
    n1, n2 = grid.shape
    h1, h2 = grid.spacing
    v = sol.values

    def at(ii, jj):
        if grid.is_polar:
            jj %= n2
        if 0 <= ii < n1 and (grid.is_polar or 0 <= jj < n2):
            return v[ii, jj]
        return 0.0  # eliminated Dirichlet node

    d1 = (at(i + 1, j) - at(i - 1, j)) / (2 * h1)
    d2 = (at(i, j + 1) - at(i, j - 1)) / (2 * h2)
    if grid.is_polar:
        r = abs(grid.node_point(i, j))
        th = math.atan2(grid.node_point(i, j).imag, grid.node_point(i, j).real)
        ux = math.cos(th) * d1 - math.sin(th) / r * d2
        uy = math.sin(th) * d1 + math.cos(th) / r * d2
    else:
        ux, uy = d1, d2
    return 0.5 * (ux - 1j * uy)


def grid_mixed_derivative(center: DiscreteGreen, z: complex, w_shift_solves) -> complex:
    """d^2 G(z, w) / dz d(conj w) from four source-shifted solves.

    ``w_shift_solves`` must contain the solves whose sources sit at the four
    axis neighbors of the center solve's source node (radial and angular
    neighbors on polar grids).  The z-derivative is taken inside each field,
    the conj(w)-derivative across the fields.
    """
    grid = center.grid
    i0, j0 = center.source_index
    n2 = grid.shape[1]
    by_offset = {}
    for sol in w_shift_solves:
        di = sol.source_index[0] - i0
        dj = sol.source_index[1] - j0
        if grid.is_polar:
            dj = (dj + n2 // 2) % n2 - n2 // 2
        by_offset[(di, dj)] = sol
    needed = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    missing = [o for o in needed if o not in by_offset]
    if missing:
        raise ParameterError(f"missing shifted solves at offsets {missing}")

    zi = grid.snap_index(z)
    if grid.margin_cells(zi) < 2:
        raise ParameterError(f"evaluation point {z} is too close to the boundary")
    d = {o: _dz_on_grid(by_offset[o], zi) for o in needed}

    h1, h2 = grid.spacing
    d1 = (d[(1, 0)] - d[(-1, 0)]) / (2 * h1)
    d2 = (d[(0, 1)] - d[(0, -1)]) / (2 * h2)
    if grid.is_polar:
        wc = center.source
        r = abs(wc)
        th = math.atan2(wc.imag, wc.real)
        du = math.cos(th) * d1 - math.sin(th) / r * d2
        dv = math.sin(th) * d1 + math.cos(th) / r * d2
    else:
        du, dv = d1, d2
    return 0.5 * (du + 1j * dv)


def solve_mixed(op: DiscreteOperator, z: complex, w: complex) -> complex:
    """Convenience wrapper: run the center and four shifted solves, then combine.

    All five solves share the operator factorization, so the marginal cost of
    each extra source is one sparse triangular solve.
    """
    grid = op.grid
    i0, j0 = grid.snap_index(w)
    if grid.margin_cells((i0, j0)) < 3:
        raise ParameterError(f"source {w} needs three cells of margin for shifted solves")
    center = solve_green(op, grid.node_point(i0, j0))
    n2 = grid.shape[1]
    shifts = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        jj = (j0 + dj) % n2 if grid.is_polar else j0 + dj
        shifts.append(solve_green(op, grid.node_point(i0 + di, jj)))
    return grid_mixed_derivative(center, z, shifts)


# ---------------------------------------------------------------------------
# Separable series reference for the rectangle
# ---------------------------------------------------------------------------


def rectangle_green_series(domain: Rectangle, source: complex, xs, ys, terms: int = 200) -> np.ndarray:
    """Eigenfunction-series Green's function of the Laplace problem
    -Delta G = 2 pi delta on a rectangle with zero boundary values.

    Returns G on the tensor grid xs x ys via two dense matrix products; with
    ``terms`` modes per axis the cost is O((len(xs) + len(ys)) terms^2).
    Used as the independent reference for the rho = 1 grid solver.
    """
    lx = domain.x1 - domain.x0
    ly = domain.y1 - domain.y0
    m = np.arange(1, terms + 1)
    sx = np.sin(np.pi * np.outer(np.asarray(xs) - domain.x0, m) / lx)
    sy = np.sin(np.pi * np.outer(np.asarray(ys) - domain.y0, m) / ly)
    sxq = np.sin(np.pi * m * (source.real - domain.x0) / lx)
    syq = np.sin(np.pi * m * (source.imag - domain.y0) / ly)
    lam = np.pi**2 * ((m**2 / lx**2)[:, None] + (m**2 / ly**2)[None, :])
    coeff = 2.0 * np.pi * (4.0 / (lx * ly)) * np.outer(sxq, syq) / lam
    return sx @ coeff @ sy.T
