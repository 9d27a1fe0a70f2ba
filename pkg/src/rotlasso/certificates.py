"""Restricted-eigenvalue, orthogonality, and isometry certificates with witnesses.

Minimization constants (the two restricted-eigenvalue variants, the restricted
smallest eigenvalue) are certified by feasible points, so reported values are
upper bounds on the true constants; they equal the objective at the returned
witness.  Maximization constants (restricted normalized orthogonality,
restricted isometry deviation) are exact when computed by complete
enumeration, and lower bounds when sampled.

Computing a restricted eigenvalue exactly is intractable in general.  The
shipped certificate is a 64-restart projected-gradient upper bound; on small
instances with at most 3 certified coordinates a brute-force angular grid
(2 degree resolution, then polished) serves as an independent oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from ._projection import project_l1_columns
from .core import (
    DegenerateInputError,
    DesignMatrix,
    EnumerationTooLargeError,
    InvalidSupportError,
    SeedSpec,
    SparseVector,
    SupportSet,
    orthonormal_basis,
    seeded_stream,
)

DEFAULT_ENUM_CAP = 1_000_000
# fixed so that certificates are reproducible when the caller passes no seed
DEFAULT_SOLVER_SEED = SeedSpec(0x5EED, 0)

KIND_RE_GAMMA = "re_gamma"
KIND_RE_GAMMA_PRIME = "re_gamma_prime"
KIND_RNO = "rno"
KIND_RIP = "rip"
KIND_LAMBDA_MIN = "lambda_min"


@dataclass(frozen=True)
class ConeSpec:
    """The feasible cone: off-support l1 mass at most L times the on-support l1 mass."""

    S: SupportSet
    L: float = 1.0

    def __post_init__(self):
        if not self.L >= 1.0:
            raise ValueError("cone slack L must be >= 1")


@dataclass
class SolverReport:
    iterations: int = 0
    restarts: int = 0
    residual: float = 0.0
    converged: bool = True
    spread: float | None = None
    complete: bool | None = None

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "restarts": self.restarts,
            "residual": self.residual,
            "converged": self.converged,
            "spread": self.spread,
            "complete": self.complete,
        }


@dataclass
class Certificate:
    kind: str
    value: float
    witness: object
    method: str
    solver_report: SolverReport = field(default_factory=SolverReport)

    def to_json_dict(self) -> dict:
        w = self.witness
        if isinstance(w, SparseVector):
            witness = {"type": "vector", "dim": w.dim, "terms": [[i, v] for i, v in w.terms]}
        elif isinstance(w, SupportSet):
            witness = {"type": "support", "dim": w.dim, "indices": list(w.indices)}
        elif isinstance(w, tuple) and len(w) == 2 and all(isinstance(x, SupportSet) for x in w):
            witness = {
                "type": "support_pair",
                "dim": w[0].dim,
                "alpha": list(w[0].indices),
                "beta": list(w[1].indices),
            }
        else:
            witness = None
        return {
            "kind": self.kind,
            "value": self.value,
            "witness": witness,
            "method": self.method,
            "solver_report": self.solver_report.to_json_dict(),
        }


def cone_membership(z, cone: ConeSpec, tol: float = 1e-12) -> bool:
    """Whether the off-support l1 mass of z is at most L times the on-support mass."""
    zd = z.to_dense() if isinstance(z, SparseVector) else np.asarray(z, dtype=np.float64)
    if zd.size != cone.S.dim:
        raise InvalidSupportError(f"vector dim {zd.size} does not match cone dim {cone.S.dim}")
    on = float(np.abs(zd[cone.S.array()]).sum())
    off = float(np.abs(zd).sum()) - on
    return off <= cone.L * on + tol


def re_objective_value(X: DesignMatrix, z, S_prime: SupportSet, mode: str = "gamma") -> float:
    """(1/n)||Xz||^2 divided by ||z_{S'}||^2 (gamma) or ||z||^2 (gamma_prime)."""
    zd = z.to_dense() if isinstance(z, SparseVector) else np.asarray(z, dtype=np.float64)
    if zd.size != X.n_cols:
        raise InvalidSupportError("vector dimension does not match the design")
    img = X.entries @ zd
    num = float(img @ img) / X.n_rows
    if mode == "gamma":
        on = zd[S_prime.array()]
        den = float(on @ on)
    elif mode == "gamma_prime":
        den = float(zd @ zd)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if den <= 0.0:
        raise DegenerateInputError("objective undefined: denominator vanishes")
    return num / den


# ---------------------------------------------------------------------------
# inner convex solver: min 2 b^T v + v^T G v over an l1 ball, batched columns
# ---------------------------------------------------------------------------


def _quad_cols(G_AA, G_AB, G_BB, U, V):
    f = np.einsum("pm,pm->m", U, G_AA @ U)
    if V.shape[0]:
        f = f + 2.0 * np.einsum("pm,pm->m", U, G_AB @ V)
        f = f + np.einsum("qm,qm->m", V, G_BB @ V)
    return f


def _inner_min(G, B, radii, step, v0=None, tol=1e-9, max_iter=100_000, check_every=25):
    """FISTA with gradient restarts for min_v 2 b^T v + v^T G v, ||v||_1 <= r.

    B holds one column b per problem; radii one radius per problem.  Converged
    columns are frozen and dropped from the working set, so the cost tracks
    the hard problems only.  Returns (V, iterations, worst fixed-point
    residual, all_converged).
    """
    q, m = B.shape
    if q == 0 or m == 0:
        return np.zeros((q, m)), 0, 0.0, True
    out = np.zeros((q, m)) if v0 is None else project_l1_columns(np.asarray(v0, float), radii)
    active = np.arange(m)
    V = out[:, active].copy()
    Ba, ra = B[:, active], radii[active]
    W = V.copy()
    t = np.ones(active.size)
    it = 0
    worst = 0.0
    while it < max_iter and active.size:
        grad = 2.0 * (Ba + G @ W)
        V_new = project_l1_columns(W - step * grad, ra)
        dv = V_new - V
        restart = np.einsum("qm,qm->m", W - V_new, dv) > 0.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        mom[restart] = 0.0
        t_new[restart] = 1.0
        W = V_new + mom * dv
        V = V_new
        t = t_new
        it += 1
        if it % check_every == 0 or it >= max_iter:
            g = 2.0 * (Ba + G @ V)
            P = project_l1_columns(V - step * g, ra)
            res = np.linalg.norm(P - V, axis=0) / (1.0 + np.linalg.norm(V, axis=0))
            done = res <= tol
            out[:, active] = V
            worst = float(np.max(res[~done])) if np.any(~done) else float(np.max(res))
            if np.all(done):
                return out, it, worst, True
            keep = ~done
            active = active[keep]
            V, W, t = V[:, keep], W[:, keep], t[keep]
            Ba, ra = Ba[:, keep], ra[keep]
    out[:, active] = V
    return out, it, worst, active.size == 0


# ---------------------------------------------------------------------------
# restricted-eigenvalue solvers
# ---------------------------------------------------------------------------


def _sphere_starts(rng, p, m):
    U = rng.standard_normal((p, m))
    U /= np.maximum(np.linalg.norm(U, axis=0), 1e-300)
    return U


def _bottom_eigvecs(G, count):
    if G.shape[0] == 0 or count <= 0:
        return []
    vals, vecs = np.linalg.eigh(G)
    return [vecs[:, i] for i in range(min(count, G.shape[0]))]


def _gamma_smart_starts(G_AA, G_BB, p, q, L):
    """Deterministic starts: axis vectors, the flattest on-support direction,
    and kernel-like off-support directions loaded to the full l1 budget."""
    starts = []
    for j in range(min(p, 8)):
        u = np.zeros(p)
        u[j] = 1.0
        starts.append((u, np.zeros(q)))
    ones = np.ones(p) / math.sqrt(p)
    umin = _bottom_eigvecs(G_AA, 1)[0]
    starts.append((ones, np.zeros(q)))
    starts.append((umin, np.zeros(q)))
    if q:
        for w in _bottom_eigvecs(G_BB, 2):
            l1 = np.abs(w).sum()
            if l1 <= 1e-300:
                continue
            for u in (ones, umin):
                starts.append((u.copy(), (L * np.abs(u).sum() / l1) * w))
    return starts


def _collect_starts(P, Q, L, seed, n_starts, extra_starts, G_AA, G_BB):
    p, q = len(P), len(Q)
    rng = seeded_stream(seed if seed is not None else DEFAULT_SOLVER_SEED)
    pairs = _gamma_smart_starts(G_AA, G_BB, p, q, L)
    for z in extra_starts:
        zd = z.to_dense() if isinstance(z, SparseVector) else np.asarray(z, dtype=np.float64)
        u = zd[P]
        nu = np.linalg.norm(u)
        if nu <= 1e-300:
            continue
        pairs.append((u / nu, zd[Q] / nu))
    U_rand = _sphere_starts(rng, p, n_starts)
    V_rand = np.zeros((q, n_starts))
    if q:
        half = n_starts // 2
        raw = rng.standard_normal((q, n_starts - half))
        V_rand[:, half:] = raw
    U = np.concatenate([np.stack([u for u, _ in pairs], axis=1), U_rand], axis=1)
    V = np.concatenate([np.stack([v for _, v in pairs], axis=1), V_rand], axis=1) \
        if q else np.zeros((0, U.shape[1]))
    radii = L * np.abs(U).sum(axis=0)
    V = project_l1_columns(V, radii)
    return U, V


def _phase1_joint(G_AA, G_AB, G_BB, U, V, L, step0, max_iter=2500, window=60, rtol=1e-12):
    """Monotone joint projected-gradient descent, batched over restarts."""
    p, m = U.shape
    q = V.shape[0]
    eta = np.full(m, step0)
    f = _quad_cols(G_AA, G_AB, G_BB, U, V)
    f_window = f.copy()
    it = 0
    while it < max_iter:
        RU = 2.0 * (G_AA @ U + (G_AB @ V if q else 0.0))
        U1 = U - eta * RU
        nu = np.linalg.norm(U1, axis=0)
        ok_dir = nu > 1e-14
        U1[:, ~ok_dir] = U[:, ~ok_dir]
        nu[~ok_dir] = 1.0
        U1 = U1 / np.maximum(np.linalg.norm(U1, axis=0), 1e-300)
        radii = L * np.abs(U1).sum(axis=0)
        if q:
            RV = 2.0 * (G_AB.T @ U + G_BB @ V)
            V1 = project_l1_columns(V - eta * RV, radii)
        else:
            V1 = V
        f1 = _quad_cols(G_AA, G_AB, G_BB, U1, V1)
        accept = f1 <= f + 1e-15
        eta = np.where(accept, np.minimum(eta * 1.02, step0 * 64.0), eta * 0.5)
        U[:, accept] = U1[:, accept]
        if q:
            V[:, accept] = V1[:, accept]
        f = np.where(accept, f1, f)
        it += 1
        if it % window == 0:
            rel = (f_window - f) / np.maximum(np.abs(f_window), 1e-300)
            if np.max(rel) < rtol:
                break
            f_window = f.copy()
    return U, V, f, it


def _polish_decomposed(G_AA, G_AB, G_BB, u, v, L, step0, step_inner, inner_tol,
                       inner_cap, max_outer=40, joint_iter=6000):
    """Refine one restart: tight joint projected gradient, one exact inner
    solve, then a short alternating stage with Armijo steps on the sphere.

    The outer gradient accounts for the l1 budget moving with ||u||_1 whenever
    the inner constraint is active.
    """
    q = v.size
    U1, V1, _, _ = _phase1_joint(G_AA, G_AB, G_BB, u[:, None].copy(),
                                 v[:, None].copy(), L, step0,
                                 max_iter=joint_iter, window=100, rtol=1e-14)
    u, v = U1[:, 0], V1[:, 0]
    total_inner = 0
    worst_res = 0.0
    inner_ok = True

    def solve_inner(u_vec, warm):
        nonlocal total_inner, worst_res, inner_ok
        if q == 0:
            return np.zeros(0), L * np.abs(u_vec).sum()
        r = L * np.abs(u_vec).sum()
        b = (G_AB.T @ u_vec)[:, None]
        V, its, res, conv = _inner_min(
            G_BB, b, np.array([r]), step_inner, v0=warm[:, None],
            tol=inner_tol, max_iter=inner_cap,
        )
        total_inner += its
        worst_res = max(worst_res, res)
        inner_ok = inner_ok and conv
        return V[:, 0], r

    v, r = solve_inner(u, v)
    f = float(_quad_cols(G_AA, G_AB, G_BB, u[:, None], v[:, None])[0])
    eta = 0.5
    for _ in range(max_outer):
        grad = 2.0 * (G_AA @ u + (G_AB @ v if q else 0.0))
        if q and r > 0 and np.abs(v).sum() >= r * (1.0 - 1e-9):
            gv = 2.0 * (G_AB.T @ u + G_BB @ v)
            grad = grad + float(gv @ (v / r)) * L * np.sign(u)
        g_t = grad - float(grad @ u) * u
        gnorm = float(np.linalg.norm(g_t))
        if gnorm <= 1e-12 * (1.0 + abs(f)):
            break
        improved = False
        for _ in range(30):
            u_try = u - eta * g_t
            u_try /= np.linalg.norm(u_try)
            v_try, r_try = solve_inner(u_try, v)
            f_try = float(_quad_cols(G_AA, G_AB, G_BB, u_try[:, None], v_try[:, None])[0])
            if f_try <= f - 1e-4 * eta * gnorm * gnorm:
                u, v, r, f = u_try, v_try, r_try, f_try
                eta = min(eta * 1.5, 4.0)
                improved = True
                break
            eta *= 0.5
            if eta < 1e-16:
                break
        if not improved:
            break
    return u, v, f, total_inner, worst_res, inner_ok


def _assemble_witness(d, P, Q, u, v):
    z = np.zeros(d)
    z[P] = u
    if len(Q):
        z[Q] = v
    return SparseVector.from_dense(z)


def _gamma_decomposed(X, S_prime, L, seed, n_starts, extra_starts, inner_tol, inner_cap):
    n, d = X.n_rows, X.n_cols
    P = S_prime.array()
    Q = S_prime.complement().array()
    A = X.entries[:, P]
    G_AA = (A.T @ A) / n
    if len(Q):
        Bm = X.entries[:, Q]
        G_AB = (A.T @ Bm) / n
        G_BB = (Bm.T @ Bm) / n
        lam_bb = float(np.linalg.eigvalsh(G_BB)[-1])
        step_inner = 1.0 / max(2.0 * lam_bb, 1e-300)
    else:
        G_AB = np.zeros((len(P), 0))
        G_BB = np.zeros((0, 0))
        step_inner = 1.0
    lam_full = float(np.linalg.eigvalsh((X.entries.T @ X.entries) / n)[-1])
    step0 = 1.0 / max(2.0 * lam_full, 1e-300)

    U, V, f, it1 = _phase1_joint(G_AA, G_AB, G_BB, *_collect_starts(
        P, Q, L, seed, n_starts, extra_starts, G_AA, G_BB), L, step0)

    # exact inner solve at each restart's final direction
    radii = L * np.abs(U).sum(axis=0)
    inner_it = 0
    if len(Q):
        V, inner_it, _, _ = _inner_min(G_BB, G_AB.T @ U, radii, step_inner,
                                       v0=V, tol=max(inner_tol, 1e-7), max_iter=20_000)
    f = _quad_cols(G_AA, G_AB, G_BB, U, V)
    spread = float(np.max(f) - np.min(f))
    best = int(np.argmin(f))

    u, v, value, pol_inner, res, inner_ok = _polish_decomposed(
        G_AA, G_AB, G_BB, U[:, best].copy(),
        V[:, best].copy() if len(Q) else np.zeros(0),
        L, step0, step_inner, inner_tol, inner_cap)
    witness = _assemble_witness(d, P, Q, u, v)
    report = SolverReport(
        iterations=it1 + inner_it + pol_inner,
        restarts=U.shape[1],
        residual=res,
        converged=inner_ok,
        spread=spread,
    )
    return witness, report


def _grid_directions(p):
    if p == 1:
        return np.array([[1.0]])
    two_deg = np.deg2rad(2.0)
    theta = np.arange(0.0, 2.0 * np.pi - 1e-12, two_deg)
    if p == 2:
        return np.stack([np.cos(theta), np.sin(theta)])
    phi = np.arange(0.0, np.pi + 1e-12, two_deg)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([
        (np.sin(P) * np.cos(T)).ravel(),
        (np.sin(P) * np.sin(T)).ravel(),
        np.cos(P).ravel(),
    ])


def _gamma_grid_oracle(X, S_prime, L, inner_tol, inner_cap, top_k=8):
    n, d = X.n_rows, X.n_cols
    P = S_prime.array()
    Q = S_prime.complement().array()
    A = X.entries[:, P]
    G_AA = (A.T @ A) / n
    lam_full = float(np.linalg.eigvalsh((X.entries.T @ X.entries) / n)[-1])
    step0 = 1.0 / max(2.0 * lam_full, 1e-300)
    U = _grid_directions(len(P))
    if len(Q):
        Bm = X.entries[:, Q]
        G_AB = (A.T @ Bm) / n
        G_BB = (Bm.T @ Bm) / n
        lam_bb = float(np.linalg.eigvalsh(G_BB)[-1])
        step_inner = 1.0 / max(2.0 * lam_bb, 1e-300)
        radii = L * np.abs(U).sum(axis=0)
        # coarse sweep to locate the global basin, exact polish afterwards
        V, it_sweep, _, _ = _inner_min(G_BB, G_AB.T @ U, radii, step_inner,
                                       tol=1e-5, max_iter=5_000)
    else:
        G_AB = np.zeros((len(P), 0))
        G_BB = np.zeros((0, 0))
        step_inner = 1.0
        V = np.zeros((0, U.shape[1]))
        it_sweep = 0
    f = _quad_cols(G_AA, G_AB, G_BB, U, V)
    order = np.argsort(f, kind="stable")[:top_k]
    best_val = math.inf
    best = None
    total = it_sweep
    # light polish to rank the leading grid candidates, full polish on the winner
    for idx in order:
        u, v, val, its, _, _ = _polish_decomposed(
            G_AA, G_AB, G_BB, U[:, idx].copy(),
            V[:, idx].copy() if len(Q) else np.zeros(0),
            L, step0, step_inner, max(inner_tol, 1e-7), 20_000,
            max_outer=10, joint_iter=2000)
        total += its
        if val < best_val:
            best_val = val
            best = (u, v)
    u, v, best_val, its, worst_res, ok = _polish_decomposed(
        G_AA, G_AB, G_BB, best[0], best[1], L, step0, step_inner, inner_tol, inner_cap)
    total += its
    witness = _assemble_witness(d, P, Q, u, v)
    report = SolverReport(iterations=total, restarts=U.shape[1],
                          residual=worst_res, converged=ok, spread=None)
    return witness, report


def _re_joint(X, cone, S_prime, mode, seed, n_starts, extra_starts,
              max_iter=4000, polish_iter=4000):
    """Projected gradient on the cone with per-restart backtracking.

    Used for the gamma_prime objective and for gamma with a cone support
    strictly larger than the certified set.  Iterates stay feasible: after
    each step the off-support block is projected onto the l1 ball whose
    radius the on-support block currently allows, and the vector is rescaled
    so the denominator block has unit norm.
    """
    n, d = X.n_rows, X.n_cols
    G = (X.entries.T @ X.entries) / n
    Sidx = cone.S.array()
    off = cone.S.complement().array()
    den = S_prime.array() if mode == "gamma" else np.arange(d)
    den_mask = np.zeros(d)
    den_mask[den] = 1.0
    L = cone.L
    lam = float(np.linalg.eigvalsh(G)[-1])
    step0 = 1.0 / max(2.0 * lam, 1e-300)

    def feasible(Z):
        radii = L * np.abs(Z[Sidx]).sum(axis=0)
        if len(off):
            Z[off] = project_l1_columns(Z[off], radii)
        dn = np.linalg.norm(Z[den], axis=0)
        alive = dn > 1e-300
        Z[:, alive] /= dn[alive]
        return Z, alive

    rng = seeded_stream(seed if seed is not None else DEFAULT_SOLVER_SEED)
    cols = []
    for j in S_prime.indices[:8]:
        e = np.zeros(d)
        e[j] = 1.0
        cols.append(e)
    ones = np.zeros(d)
    ones[S_prime.array()] = 1.0 / math.sqrt(S_prime.size)
    cols.append(ones)
    Gp = G[np.ix_(S_prime.array(), S_prime.array())]
    for w in _bottom_eigvecs(Gp, 1):
        e = np.zeros(d)
        e[S_prime.array()] = w
        cols.append(e)
    if len(off):
        G_off = G[np.ix_(off, off)]
        for w in _bottom_eigvecs(G_off, 2):
            l1 = np.abs(w).sum()
            if l1 <= 1e-300:
                continue
            for base in (ones, cols[0]):
                z = base.copy()
                z[off] = (L * np.abs(z[Sidx]).sum() / l1) * w
                cols.append(z)
    for z in extra_starts:
        zd = z.to_dense() if isinstance(z, SparseVector) else np.asarray(z, dtype=np.float64)
        cols.append(zd.copy())
    Z = np.concatenate([np.stack(cols, axis=1), rng.standard_normal((d, n_starts))], axis=1)
    Z, alive = feasible(Z)
    m = Z.shape[1]
    eta = np.full(m, step0)
    GZ = G @ Z
    rho = np.einsum("dm,dm->m", Z, GZ)
    rho[~alive] = np.inf
    it = 0
    window = 80
    rho_window = rho.copy()
    total = max_iter + polish_iter
    while it < total:
        grad = 2.0 * (GZ - rho * (Z * den_mask[:, None]))
        Z1, alive1 = feasible(Z - eta * grad)
        GZ1 = G @ Z1
        rho1 = np.einsum("dm,dm->m", Z1, GZ1)
        rho1[~alive1] = np.inf
        accept = rho1 <= rho + 1e-15
        eta = np.where(accept, np.minimum(eta * 1.02, step0 * 64.0), eta * 0.5)
        Z[:, accept] = Z1[:, accept]
        GZ[:, accept] = GZ1[:, accept]
        rho = np.where(accept, rho1, rho)
        it += 1
        if it % window == 0:
            rel = (rho_window - rho) / np.maximum(np.abs(rho_window), 1e-300)
            if np.max(rel) < 1e-13:
                break
            rho_window = rho.copy()
    spread = float(np.max(rho[np.isfinite(rho)]) - np.min(rho))
    best = int(np.argmin(rho))
    z = Z[:, best].copy()
    grad = 2.0 * (G @ z - rho[best] * (z * den_mask))
    g_t = grad - float(grad @ z) * z
    report = SolverReport(iterations=it, restarts=m,
                          residual=float(np.linalg.norm(g_t)),
                          converged=it < total, spread=spread)
    return SparseVector.from_dense(z), report


def re_constant(X: DesignMatrix, cone: ConeSpec, S_prime: SupportSet,
                mode: str = "gamma", method: str = "multistart", *,
                seed: SeedSpec | None = None, n_starts: int = 64,
                extra_starts=(), inner_tol: float = 1e-9,
                max_inner_iter: int = 100_000) -> Certificate:
    """Certified upper bound on a restricted-eigenvalue constant.

    The minimum runs over the cone of ``cone`` (usually the cone of
    ``S_prime`` itself) with the denominator taken on ``S_prime``:
    ``||z_{S'}||^2`` in mode ``gamma``, ``||z||^2`` in mode ``gamma_prime``.

    ``multistart`` decomposes mode ``gamma`` into an outer search over unit
    on-support directions and an exact convex inner minimization over the
    off-support l1 ball; mode ``gamma_prime`` runs projected gradient over
    full cone directions with post-hoc normalization (seeded with the
    gamma-mode witness, which is always feasible).  ``grid_oracle`` replaces
    the outer search by a 2 degree angular grid and supports mode ``gamma``
    with at most 3 certified coordinates.
    """
    if mode not in ("gamma", "gamma_prime"):
        raise ValueError(f"unknown mode {mode!r}")
    if method not in ("multistart", "grid_oracle"):
        raise ValueError(f"unknown method {method!r}")
    if S_prime.size == 0:
        raise InvalidSupportError("S_prime must be non-empty")
    if S_prime.dim != X.n_cols or cone.S.dim != X.n_cols:
        raise InvalidSupportError("support dimensions must match the design")
    if not cone.S.contains(S_prime):
        raise InvalidSupportError("S_prime must be contained in the cone support")
    same = cone.S.indices == S_prime.indices

    if method == "grid_oracle":
        if mode != "gamma" or not same:
            raise ValueError("grid_oracle supports mode gamma with cone support == S_prime")
        if S_prime.size > 3:
            raise ValueError("grid_oracle supports at most 3 certified coordinates")
        witness, report = _gamma_grid_oracle(X, S_prime, cone.L, inner_tol, max_inner_iter)
    elif mode == "gamma" and same:
        witness, report = _gamma_decomposed(X, S_prime, cone.L, seed, n_starts,
                                            extra_starts, inner_tol, max_inner_iter)
    else:
        starts = list(extra_starts)
        if mode == "gamma_prime" and same:
            # any gamma-mode witness is feasible here and evaluates to at most
            # the gamma value, which keeps the certified ordering consistent
            pre, _ = _gamma_decomposed(X, S_prime, cone.L, seed, max(n_starts // 2, 8),
                                       extra_starts, max(inner_tol, 1e-7), 20_000)
            starts.append(pre)
        witness, report = _re_joint(X, cone, S_prime, mode, seed, n_starts, starts)

    value = re_objective_value(X, witness, S_prime, mode)
    kind = KIND_RE_GAMMA if mode == "gamma" else KIND_RE_GAMMA_PRIME
    return Certificate(kind=kind, value=value, witness=witness,
                       method=method, solver_report=report)


def lambda_min_restricted(X: DesignMatrix, S: SupportSet) -> Certificate:
    """Smallest eigenvalue of the scaled on-support Gram matrix, with eigenvector."""
    if S.size < 1:
        raise InvalidSupportError("support must be non-empty")
    if S.dim != X.n_cols:
        raise InvalidSupportError("support dimension must match the design")
    A = X.entries[:, S.array()]
    gram = (A.T @ A) / X.n_rows
    vals, vecs = np.linalg.eigh(gram)
    z = np.zeros(X.n_cols)
    z[S.array()] = vecs[:, 0]
    return Certificate(
        kind=KIND_LAMBDA_MIN,
        value=float(vals[0]),
        witness=SparseVector.from_dense(z),
        method="exact_svd",
        solver_report=SolverReport(iterations=1, restarts=1, residual=0.0),
    )


# ---------------------------------------------------------------------------
# restricted normalized orthogonality
# ---------------------------------------------------------------------------


def rno_fixed_supports(X: DesignMatrix, S: SupportSet, S_alpha: SupportSet,
                       S_beta: SupportSet) -> float:
    """Largest cosine of a principal angle between two restricted column spans.

    ``S_alpha`` picks columns inside S, ``S_beta`` columns inside the
    complement of S; the value is the exact maximum normalized inner product
    of vectors from the two spans (largest singular value of the product of
    the orthonormal bases).  A trivial span on either side gives 0.
    """
    for sup, name in ((S_alpha, "S_alpha"), (S_beta, "S_beta")):
        if sup.dim != X.n_cols:
            raise InvalidSupportError(f"{name} dimension must match the design")
        if sup.size == 0:
            raise InvalidSupportError(f"{name} must be non-empty")
    if not S.contains(S_alpha):
        raise InvalidSupportError("S_alpha must lie inside S")
    if not S.complement().contains(S_beta):
        raise InvalidSupportError("S_beta must lie outside S")
    Phi_a = orthonormal_basis(X.entries[:, S_alpha.array()])
    Phi_b = orthonormal_basis(X.entries[:, S_beta.array()])
    if Phi_a.shape[1] == 0 or Phi_b.shape[1] == 0:
        return 0.0
    s = np.linalg.svd(Phi_a.T @ Phi_b, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0))


def _masked_bases(E, supports, chunk=2048):
    """Orthonormal span bases for a stack of same-size supports.

    Rank-deficient spans keep their full-width factor with the excess columns
    zeroed, so downstream products see exactly the span and nothing more.
    """
    N, s = supports.shape
    n = E.shape[0]
    out = np.empty((N, n, s))
    for lo in range(0, N, chunk):
        hi = min(lo + chunk, N)
        stack = np.moveaxis(E[:, supports[lo:hi]], 0, 1)
        U, sv, _ = np.linalg.svd(stack, full_matrices=False)
        lead = np.maximum(sv[:, :1], 1e-300)
        mask = sv > 1e-10 * lead
        out[lo:hi] = U * mask[:, None, :]
    return out


def _pair_values_max(Ua, Ub, chunk_pairs=2_000_000):
    """Max (and first argmax) of sigma_max(Ua_i^T Ub_j) over all pairs (i, j)."""
    Na, _, s = Ua.shape
    Nb = Ub.shape[0]
    best = -1.0
    best_pair = (0, 0)
    rows = max(1, chunk_pairs // max(Nb, 1))
    for lo in range(0, Na, rows):
        hi = min(lo + rows, Na)
        C = np.einsum("ans,bnt->abst", Ua[lo:hi], Ub)
        sv = np.linalg.svd(C.reshape(-1, s, s), compute_uv=False)[:, 0]
        sv = sv.reshape(hi - lo, Nb)
        idx = np.unravel_index(int(np.argmax(sv)), sv.shape)
        val = float(sv[idx])
        if val > best:
            best = val
            best_pair = (lo + int(idx[0]), int(idx[1]))
    return min(max(best, 0.0), 1.0), best_pair


def _sampled_subsets(rng, pool, s, count):
    pool = np.asarray(pool, dtype=np.intp)
    keys = rng.random((count, pool.size))
    take = np.argpartition(keys, s - 1, axis=1)[:, :s]
    return np.sort(pool[take], axis=1)


def rno_constant(X: DesignMatrix, S: SupportSet, s: int,
                 cap: int = DEFAULT_ENUM_CAP, sample_pairs: int | None = None,
                 seed: SeedSpec | None = None) -> Certificate:
    """Worst normalized inner product between s-column spans across the S boundary.

    Enumerates supports of size exactly s on both sides (enlarging a support
    enlarges its span, so the maximum is attained at full size).  Complete
    enumeration is exact; when the pair count exceeds ``cap`` pass
    ``sample_pairs`` to get a sampled lower bound instead.
    """
    if S.dim != X.n_cols:
        raise InvalidSupportError("support dimension must match the design")
    comp = S.complement()
    if not 1 <= s <= min(S.size, comp.size):
        raise ValueError(f"need 1 <= s <= min(|S|, |S^c|), got s={s}")
    n_pairs = comb(S.size, s) * comb(comp.size, s)
    if sample_pairs is None:
        if n_pairs > cap:
            raise EnumerationTooLargeError(
                f"{n_pairs} support pairs exceed the cap {cap}; pass sample_pairs "
                f"(CLI: --sample-pairs) for a sampled lower bound"
            )
        alpha = np.array(list(itertools.combinations(S.indices, s)), dtype=np.intp)
        beta = np.array(list(itertools.combinations(comp.indices, s)), dtype=np.intp)
        complete = True
        evaluated = n_pairs
    else:
        rng = seeded_stream(seed if seed is not None else DEFAULT_SOLVER_SEED)
        alpha = _sampled_subsets(rng, S.indices, s, sample_pairs)
        beta = _sampled_subsets(rng, comp.indices, s, sample_pairs)
        complete = False
        evaluated = sample_pairs
    Ua = _masked_bases(X.entries, alpha)
    Ub = _masked_bases(X.entries, beta)
    if complete:
        value, (ia, ib) = _pair_values_max(Ua, Ub)
    else:
        C = np.einsum("ans,ant->ast", Ua, Ub)
        sv = np.linalg.svd(C, compute_uv=False)[:, 0]
        ia = ib = int(np.argmax(sv))
        value = float(min(max(sv[ia], 0.0), 1.0))
    witness = (SupportSet(X.n_cols, tuple(int(i) for i in alpha[ia])),
               SupportSet(X.n_cols, tuple(int(i) for i in beta[ib])))
    return Certificate(
        kind=KIND_RNO, value=value, witness=witness, method="enumeration",
        solver_report=SolverReport(iterations=evaluated, restarts=1,
                                   residual=0.0, complete=complete),
    )


def rip_constant(X_unit: DesignMatrix, s: int, cap: int = DEFAULT_ENUM_CAP,
                 sample_supports: int | None = None,
                 seed: SeedSpec | None = None) -> Certificate:
    """Worst singular-value deviation from 1 over all s-column submatrices.

    The caller passes the design with unit columns (the normalized convention
    divided by sqrt(n)); the value is max(1 - sigma_min, sigma_max - 1) over
    supports of size exactly s, which dominates all smaller supports.
    """
    d = X_unit.n_cols
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}")
    n_sup = comb(d, s)
    if sample_supports is None:
        if n_sup > cap:
            raise EnumerationTooLargeError(
                f"{n_sup} supports exceed the cap {cap}; pass sample_supports "
                f"for a sampled lower bound"
            )
        supports = np.array(list(itertools.combinations(range(d), s)), dtype=np.intp)
        complete = True
    else:
        rng = seeded_stream(seed if seed is not None else DEFAULT_SOLVER_SEED)
        supports = _sampled_subsets(rng, np.arange(d), s, sample_supports)
        complete = False
    best = -1.0
    best_i = 0
    chunk = 4096
    for lo in range(0, supports.shape[0], chunk):
        hi = min(lo + chunk, supports.shape[0])
        stack = np.moveaxis(X_unit.entries[:, supports[lo:hi]], 0, 1)
        sv = np.linalg.svd(stack, compute_uv=False)
        dev = np.maximum(1.0 - sv[:, -1], sv[:, 0] - 1.0)
        i = int(np.argmax(dev))
        if float(dev[i]) > best:
            best = float(dev[i])
            best_i = lo + i
    witness = SupportSet(d, tuple(int(i) for i in supports[best_i]))
    return Certificate(
        kind=KIND_RIP, value=best, witness=witness, method="enumeration",
        solver_report=SolverReport(iterations=supports.shape[0], restarts=1,
                                   residual=0.0, complete=complete),
    )


def rip_to_rno_bound(delta: float) -> float:
    """Orthogonality level guaranteed by an isometry deviation of delta."""
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    return 4.0 * delta / (1.0 - delta) ** 2


def rno_to_re_lower_bound(epsilon: float, s: int, s_prime_size: int,
                          gamma_S: float, C: float = 4.0) -> float:
    """Lower bound on the full-design constant implied by orthogonality level epsilon.

    May be negative; callers clamp for display only.  The absolute constant C
    is a knob (any value at least the hidden proof constant is sound).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if s < 1:
        raise ValueError("s must be positive")
    if s_prime_size < 1:
        raise ValueError("s_prime_size must be positive")
    if not gamma_S > 0:
        raise ValueError("gamma_S must be positive")
    if not C > 0:
        raise ValueError("C must be positive")
    return (1.0 - epsilon - C * math.sqrt(s_prime_size / (gamma_S * s))) * gamma_S


def partial_rotation_failure_rate(regenerate, S: SupportSet, alpha, beta,
                                  epsilon: float, trials: int,
                                  seed: SeedSpec) -> float:
    """Fraction of regenerated designs whose fixed cross-block correlation exceeds epsilon.

    ``regenerate`` maps a SeedSpec to a fresh design; ``alpha`` weights the S
    columns and ``beta`` the complement columns.  Trials run on independent
    substreams, so the rate is reproducible and order-independent.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    comp = S.complement()
    a = alpha.to_dense() if isinstance(alpha, SparseVector) else np.asarray(alpha, float)
    b = beta.to_dense() if isinstance(beta, SparseVector) else np.asarray(beta, float)
    if a.size != S.size or b.size != comp.size:
        raise InvalidSupportError(
            f"alpha must have dim |S|={S.size} and beta dim |S^c|={comp.size}")
    Sarr, Carr = S.array(), comp.array()
    count = 0
    for t in range(trials):
        Xp = regenerate(seed.substream(t))
        u = Xp.entries[:, Sarr] @ a
        v = Xp.entries[:, Carr] @ b
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        floor = 1e-12 * math.sqrt(Xp.n_rows)
        if nu <= floor * np.abs(a).sum() or nv <= floor * np.abs(b).sum():
            raise DegenerateInputError("combination collapses to zero under the generator")
        if abs(float(u @ v)) > epsilon * nu * nv:
            count += 1
    return count / trials
