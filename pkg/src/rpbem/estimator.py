"""A posteriori temporal refinement indicators and the adaptive loop.

The indicator for a window [c, d] is the squared half-order Sobolev
seminorm of the residual,

    eta = int_w int_w |r(t) - r(s)|^2 / |t - s|^2 ds dt,

evaluated after reflecting both triangular halves onto one triangle and a
Duffy substitution that moves the removable diagonal singularity to the
boundary of the unit square. Windows straddle one breakpoint each; marked
breakpoints get midpoints inserted on both sides, and grids from several
observation points are merged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import gauss01
from .timebasis import TimeGrid

__all__ = [
    "indicator_windows",
    "indicator",
    "residual_factory",
    "mark",
    "refine",
    "AdaptiveState",
    "adapt_loop",
]


def indicator_windows(grid):
    """Window [t_{j-1}, t_{j+1}] per breakpoint (one-sided at the ends)."""
    pts = grid.points
    l = len(pts)
    wins = []
    for j in range(l):
        lo = pts[max(j - 1, 0)]
        hi = pts[min(j + 1, l - 1)]
        wins.append((float(lo), float(hi)))
    return wins


def _indicator_core(residual, window, n):
    c, d = window
    if not d > c:
        raise ValueError("degenerate indicator window")
    x, w = gauss01(n)
    width = d - c
    u = width * x + c
    ubar = c + d - u
    v = width * (x[:, None] * x[None, :])
    pts = np.concatenate([ubar, u, (ubar[:, None] + v).ravel(), (u[:, None] - v).ravel()])
    vals = np.asarray(residual(pts))
    n2 = n * n
    r_ubar = vals[:n]
    r_u = vals[n : 2 * n]
    r_up = vals[2 * n : 2 * n + n2].reshape(n, n)
    r_dn = vals[2 * n + n2 :].reshape(n, n)
    dif = (r_ubar[:, None] - r_up) ** 2 + (r_u[:, None] - r_dn) ** 2
    tt = x[:, None] * x[None, :]
    integrand = dif / np.maximum(width * tt, 1e-300) ** 2 * x[:, None]
    return float(width**2 * np.einsum("i,j,ij->", w, w, integrand))


def indicator(residual, window, n=16):
    """Seminorm indicator of a residual callable over one window."""
    return _indicator_core(residual, window, n)


def mark(indicators, alpha):
    """Indices with eta >= alpha * max(eta); empty when all indicators vanish."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("marking threshold must be in (0, 1)")
    eta = np.asarray(indicators, dtype=float)
    top = eta.max() if eta.size else 0.0
    if top <= 0.0:
        return np.zeros(0, dtype=np.intp)
    return np.nonzero(eta >= alpha * top)[0]


def refine(grid, marked_sets, tol=1e-12):
    """Insert midpoints on both sides of every marked breakpoint.

    ``marked_sets`` is an iterable of index arrays (one per observation
    point); the union of all proposed grids is returned, deduplicated.
    """
    pts = list(map(float, grid.points))
    new_pts = set()
    l = len(pts)
    for marked in marked_sets:
        for j in np.asarray(marked, dtype=int):
            if j > 0:
                new_pts.add(0.5 * (pts[j - 1] + pts[j]))
            if j < l - 1:
                new_pts.add(0.5 * (pts[j] + pts[j + 1]))
    merged = sorted(pts + list(new_pts))
    scale = max(abs(merged[-1]), 1.0)
    out = [merged[0]]
    for t in merged[1:]:
        if t - out[-1] > tol * scale:
            out.append(t)
    return TimeGrid(out)


# --- residual of the full 3D problem ----------------------------------------

def residual_factory(solution, mesh, g_dot, x0, n=8, tol_on_surface=1e-8):
    """Residual r(t) = S[phi_dot](x0, t) - g_dot(x0, t) as a time callable.

    x0 must lie on the mesh surface. Every panel is parametrized by the
    collapsed-square map; panels that touch x0 are reordered so x0 is the
    map apex, which cancels the 1/|x0 - y| singularity against the map
    Jacobian.
    """
    from .geometry import point_triangle_distance
    from .quadrature import gauss01 as _g01

    x0 = np.asarray(x0, dtype=float)
    d_surf = point_triangle_distance(
        np.broadcast_to(x0, (mesh.n_triangles, 3)), mesh.corners
    ).min()
    if d_surf > tol_on_surface:
        raise ValueError(f"observation point is {d_surf:.2e} away from the surface")
    x01, w01 = _g01(n)
    U, V = np.meshgrid(x01, x01, indexing="ij")
    u = U.ravel()
    w2 = (w01[:, None] * w01[None, :]).ravel() * u
    uh = np.column_stack([u, u * V.ravel()])
    lam_ref = np.column_stack([1.0 - uh[:, 0], uh[:, 0] - uh[:, 1], uh[:, 1]])

    tris = mesh.triangles
    order = np.array(
        [
            np.roll(tri, -int(np.argmin(np.linalg.norm(mesh.vertices[tri] - x0, axis=1))))
            if np.min(np.linalg.norm(mesh.vertices[tri] - x0, axis=1)) < tol_on_surface
            else tri
            for tri in tris
        ],
        dtype=np.intp,
    )
    c = mesh.vertices[order]
    pts = (
        c[:, None, 0, :]
        + uh[None, :, 0, None] * (c[:, 1] - c[:, 0])[:, None, :]
        + uh[None, :, 1, None] * (c[:, 2] - c[:, 1])[:, None, :]
    )
    pts = pts.reshape(-1, 3)
    wts = ((2.0 * mesh.areas)[:, None] * w2[None, :]).ravel()
    r_dist = np.linalg.norm(pts - x0[None, :], axis=1)
    wts = wts / (4.0 * np.pi * np.maximum(r_dist, 1e-300))
    basis = solution.basis
    if solution.spatial.kind == "P0":
        dens = np.repeat(solution.coeffs[:, : mesh.n_triangles], n * n, axis=1)
    else:
        lam_all = np.broadcast_to(lam_ref, (mesh.n_triangles,) + lam_ref.shape)
        vert_coeffs = solution.coeffs[:, order]  # (L, M_t, 3)
        dens = np.einsum("lmk,mpk->lmp", vert_coeffs, lam_all).reshape(len(basis), -1)
    supports = np.array([f.support for f in basis])

    def r(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = -np.asarray(g_dot(np.broadcast_to(x0, t_arr.shape + (3,)), t_arr), dtype=float).copy()
        s_lo = t_arr.min() - r_dist.max()
        s_hi = t_arr.max()
        for i, fi in enumerate(basis):
            if supports[i, 1] < s_lo or supports[i, 0] > s_hi:
                continue
            coef = dens[i]
            if not np.any(coef):
                continue
            vals = fi.deriv(t_arr[:, None] - r_dist[None, :])
            out += vals @ (wts * coef)
        return out if np.ndim(t) else float(out[0])

    return r


# --- the adaptive loop --------------------------------------------------------

@dataclass
class AdaptiveState:
    grids: list = field(default_factory=list)
    indicators: list = field(default_factory=list)  # per iteration: {x0_label: eta array}
    errors: list = field(default_factory=list)
    solutions: list = field(default_factory=list)
    dofs: list = field(default_factory=list)


def adapt_loop(problem, xi, alpha=0.5, max_iter=10, target=None, n_ind=16, keep_solutions=False):
    """Solve / estimate / mark / refine until max_iter or the error target.

    ``problem`` provides ``solve(grid) -> solution``, ``residual(solution,
    x0) -> callable``, optionally ``error(solution) -> float`` and
    ``dof_count(solution)``.
    """
    state = AdaptiveState()
    grid = problem.initial_grid
    for _ in range(max_iter):
        sol = problem.solve(grid)
        state.grids.append(grid)
        if keep_solutions:
            state.solutions.append(sol)
        state.dofs.append(problem.dof_count(sol))
        err = problem.error(sol) if hasattr(problem, "error") else None
        state.errors.append(err)
        windows = indicator_windows(grid)
        etas = {}
        marked_sets = []
        for label, x0 in xi:
            res = problem.residual(sol, x0)
            eta = np.array([indicator(res, w, n=n_ind) for w in windows])
            etas[label] = eta
            marked_sets.append(mark(eta, alpha))
        state.indicators.append(etas)
        if target is not None and err is not None and err <= target:
            break
        grid = refine(grid, marked_sets)
    return state
