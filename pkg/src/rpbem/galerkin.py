"""Block-system assembly, solve, and energy-form error measures.

The matrix couples every (test time index k, ansatz time index i) block
through a univariate distance kernel; blocks whose kernel support misses the
realized panel distances are exactly zero. Assembly walks panel pairs once
per quadrature class, accumulates piecewise-Chebyshev moments of each pair's
distance distribution, and contracts them against the per-block coefficient
tables with dense matrix products. All kernels sharing a translation
signature (uniform grids make many) share one fitted table and one
accumulator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import timekernel
from .geometry import SpatialBasis, triangle_distance_range
from .quadrature import reference_table, reference_barycentric
from .timebasis import TimeGrid, TemporalBasis

__all__ = [
    "QuadOrders",
    "SurrogateTable",
    "BlockSystem",
    "GalerkinSolution",
    "assemble_matrix",
    "assemble_rhs",
    "solve",
    "temporal_gram",
    "temporal_load",
    "spatial_mass",
    "project_exact",
    "refit_to_fine",
    "energy_error",
    "save_solution",
    "load_solution",
]


@dataclass(frozen=True)
class QuadOrders:
    """Gauss points per direction for singular / near-field / far-field pairs."""

    n_sing: int = 10
    n_near: int = 8
    n_far: int = 6

    def astuple(self):
        return (self.n_sing, self.n_near, self.n_far)


class AssemblyError(RuntimeError):
    pass


# --- temporal integrals -----------------------------------------------------

def _pair_segments(f1, f2):
    lo = max(f1.support[0], f2.support[0])
    hi = min(f1.support[1], f2.support[1])
    if hi <= lo:
        return None
    cuts = sorted({lo, hi, *(c for c in f1.breakpoints + f2.breakpoints if lo < c < hi)})
    return cuts


def temporal_gram(row_basis, col_basis=None, n=40):
    """Cross mass matrix G[k, i] = int b_row_k(t) b_col_i(t) dt."""
    from .quadrature import gauss_rule

    col_basis = row_basis if col_basis is None else col_basis
    rule = gauss_rule(n)
    G = np.zeros((len(row_basis), len(col_basis)))
    for k, fk in enumerate(row_basis):
        for i, fi in enumerate(col_basis):
            cuts = _pair_segments(fk, fi)
            if cuts is None:
                continue
            total = 0.0
            for a, b in zip(cuts[:-1], cuts[1:]):
                half = 0.5 * (b - a)
                t = 0.5 * (a + b) + half * rule.nodes
                total += half * float(rule.weights @ (fk.value(t) * fi.value(t)))
            G[k, i] = total
    return G


def temporal_load(basis, fn, n=40):
    """Vector m[k] = int fn(t) b_k(t) dt, split at each function's breakpoints."""
    from .quadrature import gauss_rule

    rule = gauss_rule(n)
    out = np.zeros(len(basis))
    for k, fk in enumerate(basis):
        cuts = fk.breakpoints
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (b - a)
            t = 0.5 * (a + b) + half * rule.nodes
            total += half * float(rule.weights @ (np.asarray(fn(t)) * fk.value(t)))
        out[k] = total
    return out


def spatial_mass(mesh, spatial):
    """Surface mass matrix for the spatial basis (P0 diagonal, P1 linear FEM)."""
    if spatial.kind == "P0":
        return np.diag(mesh.areas)
    M = np.zeros((spatial.size, spatial.size))
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    for t, area in zip(mesh.triangles, mesh.areas):
        M[np.ix_(t, t)] += area * local
    return M


# --- surrogate tables -------------------------------------------------------

def _translation_key(bk, bi, digits=12):
    wk = np.asarray(bk.window)
    wi = np.asarray(bi.window)
    return (
        bk.kind,
        bk.degree,
        tuple(np.round(wk - wk[0], digits)),
        bi.kind,
        bi.degree,
        tuple(np.round(wi - wi[0], digits)),
        round(float(wk[0] - wi[0]), digits),
    )


class SurrogateTable:
    """Chebyshev tables for every active kernel pair on one aligned partition.

    The distance axis [0, r_max] is cut into width-h subintervals anchored at
    zero; each active (k, i) block stores coefficients on the subintervals
    covering its clipped support. Blocks with identical translation
    signatures share one table.
    """

    def __init__(self, basis, r_max, q=20, subdiv=5, n_gauss=40, h=None):
        self.basis = basis
        self.r_max = float(r_max)
        self.q = int(q)
        self.n_gauss = int(n_gauss)
        L = len(basis)
        active = {}
        min_len = np.inf
        for k in range(L):
            for i in range(L):
                a, b = timekernel.kernel_support(basis, k, i)
                lo, hi = max(a, 0.0), min(b, self.r_max)
                if hi - lo <= 1e-14:
                    continue
                active[(k, i)] = (a, b)
                min_len = min(min_len, b - a)
        if not active:
            raise AssemblyError("no kernel pair overlaps the distance range")
        self.h = float(h) if h is not None else min_len / subdiv
        self.n_sub = int(np.ceil(self.r_max / self.h - 1e-12))
        self.supports = active
        self.groups = {}
        for ki, _ in active.items():
            key = _translation_key(basis[ki[0]], basis[ki[1]])
            self.groups.setdefault(key, []).append(ki)
        self.tables = {}
        self.eval_points = 0
        for key, members in self.groups.items():
            k, i = members[0]
            a, b = active[(k, i)]
            s0 = max(int(np.floor(max(a, 0.0) / self.h + 1e-12)), 0)
            s1 = min(int(np.ceil(min(b, self.r_max) / self.h - 1e-12)), self.n_sub)
            s1 = max(s1, s0 + 1)
            m_loc = s1 - s0
            coeffs = timekernel.chebyshev_fit(
                lambda r: timekernel.time_kernel(basis, k, i, r, self.n_gauss),
                s0 * self.h,
                s1 * self.h,
                m_loc,
                self.q,
            )
            self.eval_points += m_loc * self.q
            self.tables[key] = (s0, coeffs)

    def member_blocks(self):
        return [ki for members in self.groups.values() for ki in members]

    def require(self, k, i):
        key = _translation_key(self.basis[k], self.basis[i])
        if key not in self.tables:
            raise AssemblyError(f"no surrogate fitted for kernel pair ({k}, {i})")
        return self.tables[key]

    def eval(self, k, i, r):
        """Surrogate value at distances r (used by tests and the residual path)."""
        s0, coeffs = self.require(k, i)
        m_loc = coeffs.shape[0]
        sur = timekernel.ChebSurrogate(
            s0 * self.h, (s0 + m_loc) * self.h, m_loc, self.q, coeffs, (k, i)
        )
        return timekernel.eval_surrogate(sur, r)


# --- pair classification for assembly ---------------------------------------

def _pair_buckets(mesh, eta):
    """Unordered pair index lists split by class, with distance ranges."""
    tris = mesh.triangles
    nt = len(tris)
    vert_map = {}
    for t, tri in enumerate(tris):
        for v in tri:
            vert_map.setdefault(int(v), []).append(t)
    touching = {}
    for _, ts in vert_map.items():
        for a_i, ta in enumerate(ts):
            for tb in ts[a_i + 1 :]:
                key = (min(ta, tb), max(ta, tb))
                touching[key] = touching.get(key, 0) + 1
    edge_pairs = np.array([k for k, c in touching.items() if c == 2], dtype=np.intp).reshape(-1, 2)
    vertex_pairs = np.array([k for k, c in touching.items() if c == 1], dtype=np.intp).reshape(-1, 2)
    iu = np.triu_indices(nt, k=1)
    all_pairs = np.column_stack(iu)
    if len(touching):
        touch_set = set(touching)
        mask = np.array([(int(a), int(b)) not in touch_set for a, b in all_pairs])
        disjoint = all_pairs[mask]
    else:
        disjoint = all_pairs
    corners = mesh.corners
    if len(disjoint):
        dmin, dmax = triangle_distance_range(corners[disjoint[:, 0]], corners[disjoint[:, 1]])
    else:
        dmin = dmax = np.zeros(0)
    diam = mesh.diameters
    pair_h = np.maximum(diam[disjoint[:, 0]], diam[disjoint[:, 1]]) if len(disjoint) else dmin
    near_mask = dmin <= eta * pair_h
    order = np.argsort(dmin, kind="stable")
    disjoint, dmin, dmax, near_mask = (
        disjoint[order],
        dmin[order],
        dmax[order],
        near_mask[order],
    )

    def vmax(pairs):
        if not len(pairs):
            return np.zeros(0)
        c1 = corners[pairs[:, 0]]
        c2 = corners[pairs[:, 1]]
        diff = c1[:, :, None, :] - c2[:, None, :, :]
        return np.linalg.norm(diff, axis=-1).max(axis=(1, 2))

    ident = np.arange(nt, dtype=np.intp)
    ident_pairs = np.column_stack([ident, ident])
    return {
        "identical": (ident_pairs, np.zeros(nt), vmax(ident_pairs)),
        "common_edge": (edge_pairs, np.zeros(len(edge_pairs)), vmax(edge_pairs)),
        "common_vertex": (vertex_pairs, np.zeros(len(vertex_pairs)), vmax(vertex_pairs)),
        "near": (disjoint[near_mask], dmin[near_mask], dmax[near_mask]),
        "far": (disjoint[~near_mask], dmin[~near_mask], dmax[~near_mask]),
    }


def _matched_corner_orders(mesh, pairs, tag):
    """Vertex id triples per pair, shared entities leading, for both panels."""
    tris = mesh.triangles
    o1 = np.empty((len(pairs), 3), dtype=np.intp)
    o2 = np.empty((len(pairs), 3), dtype=np.intp)
    for p, (t1, t2) in enumerate(pairs):
        tri1 = list(tris[t1])
        tri2 = list(tris[t2])
        if tag == "identical":
            o1[p] = o2[p] = tri1
        elif tag == "common_edge":
            shared = [v for v in tri1 if v in tri2]
            o1[p] = shared + [v for v in tri1 if v not in shared]
            o2[p] = shared + [v for v in tri2 if v not in shared]
        elif tag == "common_vertex":
            shared = [v for v in tri1 if v in tri2]
            o1[p] = shared + [v for v in tri1 if v not in shared]
            o2[p] = shared + [v for v in tri2 if v not in shared]
        else:
            o1[p] = tri1
            o2[p] = tri2
    return o1, o2


# --- block system ------------------------------------------------------------

@dataclass
class BlockSystem:
    """L x L grid of M x M blocks, stored per shared-kernel group."""

    L: int
    M: int
    group_accs: dict  # key -> (M, M) accumulated matrix
    groups: dict  # key -> [(k, i), ...]
    basis: TemporalBasis = None
    spatial: SpatialBasis = None
    rhs: np.ndarray = None
    meta: dict = field(default_factory=dict)
    _dense: np.ndarray = None

    @property
    def size(self):
        return self.L * self.M

    def block(self, k, i):
        """The (k, i) block as an (M, M) array indexed [l, j] = (test dof, ansatz dof)."""
        if not hasattr(self, "_block_map") or self._block_map is None:
            self._block_map = {
                ki: key for key, members in self.groups.items() for ki in members
            }
        key = self._block_map.get((k, i))
        if key is None:
            return np.zeros((self.M, self.M))
        return self.group_accs[key]

    def matrix(self):
        if self._dense is None:
            n = self.size
            A = np.zeros((n, n))
            M = self.M
            for key, members in self.groups.items():
                acc = self.group_accs[key]
                for k, i in members:
                    A[k * M : (k + 1) * M, i * M : (i + 1) * M] += acc
            self._dense = A
        return self._dense

    def matvec(self, v):
        M = self.M
        v2 = v.reshape(self.L, M)
        out = np.zeros_like(v2)
        for key, members in self.groups.items():
            acc = self.group_accs[key]
            for k, i in members:
                out[k] += acc @ v2[i]
        return out.ravel()

    def quad_form(self, u, v=None):
        v = u if v is None else v
        M = self.M
        u2 = u.reshape(self.L, M)
        v2 = v.reshape(self.L, M)
        total = 0.0
        for key, members in self.groups.items():
            acc = self.group_accs[key]
            for k, i in members:
                total += u2[k] @ acc @ v2[i]
        return float(total)

    def matvec_t(self, v):
        M = self.M
        v2 = v.reshape(self.L, M)
        out = np.zeros_like(v2)
        for key, members in self.groups.items():
            acc = self.group_accs[key]
            for k, i in members:
                out[i] += acc.T @ v2[k]
        return out.ravel()


# --- the assembly engine -----------------------------------------------------

_CHUNK_POINTS = 1_500_000

try:  # compiled moment kernel; the numpy fallback is ~8x slower
    import numba as _numba

    @_numba.njit(cache=True, fastmath=True)
    def _moment_kernel(xi, wq, s_loc, lamprod_t, omega):
        P, K = xi.shape
        C = lamprod_t.shape[1]
        q = omega.shape[3]
        tv = np.empty(q)
        for p in range(P):
            for k in range(K):
                x = xi[p, k]
                w = wq[p, k]
                s = s_loc[p, k]
                tp = 1.0
                tc = x
                tv[0] = w
                for v in range(1, q):
                    tv[v] = w * tc
                    tp, tc = tc, 2.0 * x * tc - tp
                for c in range(C):
                    lam = lamprod_t[k, c]
                    row = omega[p, c, s]
                    for v in range(q):
                        row[v] += lam * tv[v]

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _moments_numpy(xi, wq, s_loc, lamprod_t, omega):
    P, K = xi.shape
    C = lamprod_t.shape[1]
    q = omega.shape[3]
    span = omega.shape[2]
    flat = (np.arange(P, dtype=np.intp)[:, None] * span + s_loc).ravel()
    nbin = P * span
    t_prev = np.zeros_like(xi)
    t_cur = np.ones_like(xi)
    for v in range(q):
        u = wq * t_cur
        for c in range(C):
            omega[:, c, :, v] += np.bincount(
                flat, weights=(u * lamprod_t[:, c][None, :]).ravel(), minlength=nbin
            ).reshape(P, span)
        if v == 0:
            t_prev, t_cur = t_cur, xi.copy()
        else:
            t_prev, t_cur = t_cur, 2.0 * xi * t_cur - t_prev


def _moment_pass(A_accs, mesh, spatial, surrogates, pairs, dmax_pair, tag, n, identical):
    """Accumulate one quadrature class into the per-group accumulators."""
    if len(pairs) == 0:
        return
    xhat, yhat, w_ref = reference_table(tag if tag in ("identical", "common_edge", "common_vertex") else "disjoint", n)
    K = len(w_ref)
    d = spatial.dofs_per_panel()
    lamx = reference_barycentric(xhat)[:, :d] if d == 3 else np.ones((K, 1))
    lamy = reference_barycentric(yhat)[:, :d] if d == 3 else np.ones((K, 1))
    # reference products lam_y[a] * lam_x[b], flattened combo index c = a*d + b
    lamprod_t = np.ascontiguousarray(
        (lamy[:, :, None] * lamx[:, None, :]).reshape(K, d * d)
    )  # (K, d*d)
    o1, o2 = _matched_corner_orders(mesh, pairs, tag if tag in ("identical", "common_edge", "common_vertex") else "disjoint")
    verts = mesh.vertices
    areas4 = 4.0 * mesh.areas[pairs[:, 0]] * mesh.areas[pairs[:, 1]]
    if spatial.kind == "P0":
        dofs1 = pairs[:, :1].astype(np.intp)
        dofs2 = pairs[:, 1:2].astype(np.intp)
    else:
        dofs1 = o1
        dofs2 = o2
    h = surrogates.h
    q = surrogates.q
    n_sub = surrogates.n_sub
    # group span table
    keys = list(surrogates.tables)
    g_s0 = np.array([surrogates.tables[key][0] for key in keys])
    g_s1 = np.array([surrogates.tables[key][0] + surrogates.tables[key][1].shape[0] for key in keys])

    P_chunk = max(1, _CHUNK_POINTS // K)
    for start in range(0, len(pairs), P_chunk):
        sl = slice(start, min(start + P_chunk, len(pairs)))
        P = sl.stop - sl.start
        c1 = verts[o1[sl]]
        c2 = verts[o2[sl]]
        x = (
            c1[:, None, 0, :]
            + xhat[None, :, 0, None] * (c1[:, 1] - c1[:, 0])[:, None, :]
            + xhat[None, :, 1, None] * (c1[:, 2] - c1[:, 1])[:, None, :]
        )
        y = (
            c2[:, None, 0, :]
            + yhat[None, :, 0, None] * (c2[:, 1] - c2[:, 0])[:, None, :]
            + yhat[None, :, 1, None] * (c2[:, 2] - c2[:, 1])[:, None, :]
        )
        x -= y
        r = np.sqrt(np.einsum("pki,pki->pk", x, x))
        del x, y
        wq = w_ref[None, :] * (areas4[sl] / (4.0 * np.pi))[:, None] / r
        s_idx = np.minimum((r / h).astype(np.intp), n_sub - 1)
        s_lo = int(s_idx.min())
        s_hi = int(s_idx.max()) + 1
        span = s_hi - s_lo
        xi = (r - (s_idx + 0.5) * h) * (2.0 / h)
        # chebyshev moments per subinterval: omega[p, c, s, v]
        omega = np.zeros((P, d * d, span, q))
        s_loc = (s_idx - s_lo).astype(np.intp)
        if _HAVE_NUMBA:
            _moment_kernel(xi, wq, s_loc, lamprod_t, omega)
        else:
            _moments_numpy(xi, wq, s_loc, lamprod_t, omega)
        # contract against every group table overlapping this span
        act = np.nonzero((g_s0 < s_hi) & (g_s1 > s_lo))[0]
        if act.size == 0:
            continue
        Cmat = np.zeros((act.size, span * q))
        for col, gi in enumerate(act):
            key = keys[gi]
            s0, coeffs = surrogates.tables[key]
            r0 = max(s0, s_lo)
            r1 = min(s0 + coeffs.shape[0], s_hi)
            block = coeffs[r0 - s0 : r1 - s0].copy()
            block[:, 0] *= 0.5  # series convention: c_0 T_0 - c_0/2
            Cmat[col, (r0 - s_lo) * q : (r1 - s_lo) * q] = block.ravel()
        vals = omega.reshape(P * d * d, span * q) @ Cmat.T  # (P*d*d, G)
        vals = vals.reshape(P, d, d, act.size)
        dd1 = dofs1[sl]
        dd2 = dofs2[sl]
        for col, gi in enumerate(act):
            acc = A_accs[keys[gi]]
            V = vals[:, :, :, col]  # [p, a, b]
            np.add.at(acc, (dd1[:, None, :], dd2[:, :, None]), V)
            if not identical:
                np.add.at(acc, (dd2[:, None, :], dd1[:, :, None]), V.transpose(0, 2, 1))


def assemble_matrix(
    mesh,
    spatial,
    tbasis,
    surrogates=None,
    orders=QuadOrders(),
    eta=2.2,
    surrogate_q=20,
    surrogate_subdiv=5,
    kernel_gauss=40,
):
    """Assemble the space-time block matrix for one mesh/basis pair."""
    buckets = _pair_buckets(mesh, eta)
    r_max = 0.0
    for _, (_, _, dmax) in buckets.items():
        if len(dmax):
            r_max = max(r_max, float(dmax.max()))
    if surrogates is None:
        surrogates = SurrogateTable(
            tbasis, r_max, q=surrogate_q, subdiv=surrogate_subdiv, n_gauss=kernel_gauss
        )
    elif surrogates.r_max < r_max - 1e-12:
        raise AssemblyError(
            f"surrogate table covers r <= {surrogates.r_max:g} but pairs reach {r_max:g}"
        )
    M = spatial.size
    accs = {key: np.zeros((M, M)) for key in surrogates.tables}
    class_order = {
        "identical": orders.n_sing,
        "common_edge": orders.n_sing,
        "common_vertex": orders.n_sing,
        "near": orders.n_near,
        "far": orders.n_far,
    }
    for tag, (pairs, dmin, dmax) in buckets.items():
        _moment_pass(
            accs,
            mesh,
            spatial,
            surrogates,
            pairs,
            dmax,
            tag,
            class_order[tag],
            identical=(tag == "identical"),
        )
    return BlockSystem(
        L=len(tbasis),
        M=M,
        group_accs=accs,
        groups=dict(surrogates.groups),
        basis=tbasis,
        spatial=spatial,
        meta={
            "orders": orders.astuple(),
            "eta": eta,
            "surrogate": {"q": surrogates.q, "h": surrogates.h},
            "mesh_checksum": mesh.checksum(),
        },
    )


# --- right-hand side ---------------------------------------------------------

def panel_quadrature(mesh, n):
    """Collapsed-square rule on every panel: points (M*n^2, 3), weights, dof map."""
    from .quadrature import gauss01

    x01, w01 = gauss01(n)
    U, V = np.meshgrid(x01, x01, indexing="ij")
    u = U.ravel()
    w2 = (w01[:, None] * w01[None, :]).ravel()
    uh = np.column_stack([u, u * V.ravel()])
    lam = np.column_stack([1.0 - uh[:, 0], uh[:, 0] - uh[:, 1], uh[:, 1]])
    c = mesh.corners
    pts = (
        c[:, None, 0, :]
        + uh[None, :, 0, None] * (c[:, 1] - c[:, 0])[:, None, :]
        + uh[None, :, 1, None] * (c[:, 2] - c[:, 1])[:, None, :]
    )
    wts = (2.0 * mesh.areas)[:, None] * (w2 * u)[None, :]
    return pts.reshape(-1, 3), wts.ravel(), np.broadcast_to(lam, (len(c),) + lam.shape).reshape(-1, 3)


def assemble_rhs(mesh, spatial, tbasis, g_dot, n_space=8, n_time=16):
    """Load vector entries int int g_dot(x, t) phi_l(x) b_k(t) dGamma dt."""
    from .quadrature import gauss_rule

    pts, wts, lam = panel_quadrature(mesh, n_space)
    if spatial.kind == "P0":
        dofs = np.repeat(np.arange(mesh.n_triangles, dtype=np.intp), n_space * n_space)[:, None]
        lam = np.ones((len(pts), 1))
    else:
        dofs = np.repeat(mesh.triangles, n_space * n_space, axis=0)
    rule = gauss_rule(n_time)
    L = len(tbasis)
    out = np.zeros((L, spatial.size))
    for k, fk in enumerate(tbasis):
        cuts = fk.breakpoints
        g_weighted = np.zeros(len(pts))
        for a, b in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (b - a)
            t_nodes = 0.5 * (a + b) + half * rule.nodes
            wt = half * rule.weights * fk.value(t_nodes)
            for tv, wv in zip(t_nodes, wt):
                g_weighted += wv * np.asarray(
                    g_dot(pts, np.full(len(pts), tv))
                )
        contrib = (g_weighted * wts)[:, None] * lam
        np.add.at(out[k], dofs.ravel(), contrib.ravel())
    return out.ravel()


# --- solve and error measures -------------------------------------------------

@dataclass
class GalerkinSolution:
    basis: TemporalBasis
    spatial: SpatialBasis
    coeffs: np.ndarray  # (L, M)
    residual_rel: float = 0.0
    mesh_checksum: str = ""

    def time_coeffs(self, j):
        return self.coeffs[:, j]

    def dof_trace(self, j, t):
        """Density at spatial DOF j as a function of time."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, fi in enumerate(self.basis):
            a = self.coeffs[i, j]
            if a != 0.0:
                out += a * fi.value(t)
        return out


def solve(system, rhs=None):
    """Dense LU solve of the flattened block system."""
    g = system.rhs if rhs is None else rhs
    if g is None:
        raise ValueError("no right-hand side attached or supplied")
    A = system.matrix()
    lu, piv = lu_factor(A, check_finite=False)
    udiag = np.abs(np.diag(lu))
    if udiag.min() < 1e-300:
        raise AssemblyError("singular system matrix (zero pivot)")
    x = lu_solve((lu, piv), g, check_finite=False)
    ng = np.linalg.norm(g)
    res = float(np.linalg.norm(A @ x - g) / ng) if ng > 0 else 0.0
    return GalerkinSolution(
        basis=system.basis,
        spatial=system.spatial,
        coeffs=x.reshape(system.L, system.M),
        residual_rel=res,
        mesh_checksum=system.meta.get("mesh_checksum", ""),
    )


def project_exact(mesh, spatial, tbasis_fine, phi_time, Y, n_time=40):
    """Coefficients of phi_time(t) * Y(x): spatial point values times the best
    L2 fit of the temporal factor on the fine basis."""
    if spatial.kind == "P0":
        cent = mesh.centroids
        nrm = np.linalg.norm(cent, axis=1, keepdims=True)
        proj = cent / np.where(nrm > 0, nrm, 1.0)
        c_space = np.asarray(Y(proj), dtype=float)
    else:
        c_space = np.asarray(Y(mesh.vertices), dtype=float)
    G = temporal_gram(tbasis_fine, n=n_time)
    m = temporal_load(tbasis_fine, phi_time, n=n_time)
    c_time = np.linalg.solve(G, m)
    return np.outer(c_time, c_space)


def refit_to_fine(solution, tbasis_fine, n_time=40):
    """Best-L2 re-expansion of each spatial DOF's time series on a finer basis."""
    G = temporal_gram(tbasis_fine, n=n_time)
    X = temporal_gram(tbasis_fine, solution.basis, n=n_time)
    return np.linalg.solve(G, X @ solution.coeffs)


def energy_error(system_fine, alpha_fine, c_fine, norm_est=None):
    """(err, err_rel) in the assembled energy form on the fine space.

    Raises if a quadratic form comes out negative beyond roundoff scale,
    which would signal an assembly defect.
    """
    d = (np.asarray(alpha_fine) - np.asarray(c_fine)).ravel()
    c = np.asarray(c_fine).ravel()
    qd = system_fine.quad_form(d)
    qc = system_fine.quad_form(c)
    if norm_est is None:
        norm_est = _norm_estimate(system_fine)
    for val, vec in ((qd, d), (qc, c)):
        nv = float(vec @ vec)
        if val < -1e-12 * norm_est * nv:
            raise AssemblyError(
                f"energy quadratic form negative beyond tolerance ({val:.3e})"
            )
    err = float(np.sqrt(max(qd, 0.0)))
    denom = float(np.sqrt(max(qc, 0.0)))
    return err, err / denom if denom > 0 else np.inf


def _norm_estimate(system, iters=20, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(system.size)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = system.matvec_t(system.matvec(v))
        lam = np.linalg.norm(w)
        if lam == 0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))


# --- serialization ------------------------------------------------------------

def save_solution(solution, path):
    doc = {
        "grid": list(map(float, solution.basis.grid.points)),
        "p": solution.basis.p,
        "spatial": solution.spatial.kind,
        "coefficients": solution.coeffs.tolist(),
        "mesh_checksum": solution.mesh_checksum,
        "residual_rel": solution.residual_rel,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_solution(path, mesh=None):
    with open(path) as fh:
        doc = json.load(fh)
    basis = TemporalBasis(TimeGrid(doc["grid"]), doc["p"])
    coeffs = np.asarray(doc["coefficients"])
    spatial = SpatialBasis(doc["spatial"], coeffs.shape[1])
    if mesh is not None and mesh.checksum() != doc["mesh_checksum"]:
        raise ValueError("solution was computed on a different mesh")
    return GalerkinSolution(
        basis=basis,
        spatial=spatial,
        coeffs=coeffs,
        residual_rel=doc.get("residual_rel", 0.0),
        mesh_checksum=doc.get("mesh_checksum", ""),
    )
