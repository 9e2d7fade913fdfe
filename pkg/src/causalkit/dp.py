"""Dominant-property checks for covectors and symmetric 2-tensors.

A covector w is accepted (InDPplus) when w(k) >= 0 for every
future-directed causal k; a symmetric tensor T when T(k, l) >= 0 for
every pair of future-directed null k, l.  Both conditions are decided
in an orthonormal frame where future null vectors are k = e0 + n, n a
unit spatial direction.  The tensor case reduces, per outer direction
n, to a covector check whose minimum over the second slot is closed
form, so only the outer unit sphere is searched: a deterministic grid
followed by projected gradient polish.

The reported margin is always the minimum of T over future null pairs
(or of w over future null vectors), so InDPplus holds exactly when the
margin clears -tol; the minus variant is decided by re-running on -T.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lorentz import CausalClass, classify, orthonormal_frame

TOL_DP = 1e-9
POLISH_STEPS = 50
_POLISH_STARTS = 4


class DPStatus(enum.Enum):
    IN_DP_PLUS = "InDPplus"
    IN_DP_MINUS = "InDPminus"
    NOT_DP = "NotDP"


@dataclass(frozen=True)
class DPVerdict:
    status: DPStatus
    margin: float
    witness: tuple | None
    boundary: bool


@dataclass(frozen=True)
class NullEigenResult:
    pairs: tuple
    degenerate: bool


# ---------------------------------------------------------------------------
# direction grids


def _icosphere(levels):
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(levels):
        cache = {}
        out = []

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = out
    return np.array(verts)


@lru_cache(maxsize=None)
def sphere_directions(d):
    """Deterministic unit-direction grid on S^(d-1).

    d = 1 enumerates both points, d = 2 uses 720 angles, d = 3 the
    twice-refined icosphere with 642 vertices.  Higher d is outside the
    supported catalog dimensions.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        return _icosphere(3)
    raise ValueError(f"direction grids support spatial dimension 1..3, got {d}")


# ---------------------------------------------------------------------------
# batched tensor margin over null pairs


def _spectral_norm_sym(M):
    return np.abs(np.linalg.eigvalsh(M)).max(axis=-1)


def dp2_margins(That, steps=POLISH_STEPS, starts=_POLISH_STARTS):
    """min over future null pairs of T(k, l) for stacked frame tensors.

    That has shape (N, n, n); returns (margins, nhat, mhat) where the
    witness pair is k = e0 + nhat, l = e0 + mhat in frame components.
    """
    That = np.asarray(That, dtype=float)
    N, n = That.shape[0], That.shape[-1]
    d = n - 1
    c = That[:, 0, 0]
    a = That[:, 0, 1:]
    M = That[:, 1:, 1:]

    grid = sphere_directions(d)
    W = np.einsum("gd,nde->nge", grid, M) + a[:, None, :]
    vals = c[:, None] + a @ grid.T - np.linalg.norm(W, axis=2)

    k = min(starts, grid.shape[0])
    start_idx = np.argpartition(vals, k - 1, axis=1)[:, :k]
    best_idx = np.take_along_axis(
        start_idx, np.argmin(np.take_along_axis(vals, start_idx, 1), axis=1)[:, None], 1
    )[:, 0]
    margins = vals[np.arange(N), best_idx]
    nhat = grid[best_idx].copy()

    if d >= 2 and steps > 0:
        # polish the k best grid starts per tensor with projected gradient
        rows = np.repeat(np.arange(N), k)
        nn = grid[start_idx.ravel()].copy()
        cc, aa, MM = c[rows], a[rows], M[rows]
        eta0 = 0.5 / (1.0 + _spectral_norm_sym(MM))
        f, w = _pair_min_rows(nn, cc, aa, MM)
        for _ in range(steps):
            nw = np.linalg.norm(w, axis=1)
            safe = np.maximum(nw, 1e-300)
            grad = aa - np.einsum("rde,re->rd", MM, w) / safe[:, None]
            gt = grad - np.einsum("rd,rd->r", grad, nn)[:, None] * nn
            gn = np.linalg.norm(gt, axis=1)
            active = gn > 1e-14 * (1.0 + np.abs(f))
            if not np.any(active):
                break
            step = eta0.copy()
            pending = active.copy()
            for _ in range(30):
                if not np.any(pending):
                    break
                cand = nn[pending] - step[pending, None] * gt[pending]
                cand /= np.linalg.norm(cand, axis=1, keepdims=True)
                fc, wc = _pair_min_rows(cand, cc[pending], aa[pending], MM[pending])
                ok = fc < f[pending] - 1e-4 * step[pending] * gn[pending] ** 2
                iok = np.flatnonzero(pending)[ok]
                nn[iok] = cand[ok]
                f[iok] = fc[ok]
                w[iok] = wc[ok]
                rest = np.flatnonzero(pending)[~ok]
                pending[:] = False
                pending[rest] = True
                step[rest] *= 0.5

        nn, f = _newton_polish_rows(nn, f, w, cc, aa, MM)

        f2 = f.reshape(N, k)
        n2 = nn.reshape(N, k, d)
        jbest = np.argmin(f2, axis=1)
        better = f2[np.arange(N), jbest] < margins
        margins = np.where(better, f2[np.arange(N), jbest], margins)
        nhat[better] = n2[np.arange(N), jbest][better]

    wvec = np.einsum("nde,ne->nd", M, nhat) + a
    nwv = np.linalg.norm(wvec, axis=1)
    mhat = np.where(nwv[:, None] > 1e-300, -wvec / np.maximum(nwv, 1e-300)[:, None], nhat)
    return margins, nhat, mhat


def _pair_min_rows(nvec, cc, aa, MM):
    w = np.einsum("rde,re->rd", MM, nvec) + aa
    return cc + np.einsum("rd,rd->r", aa, nvec) - np.linalg.norm(w, axis=1), w


def _newton_polish_rows(nn, f, w, cc, aa, MM, iters=40):
    """Drive gradient-polished rows to the exact sphere minimum.

    The reduced objective is smooth away from w = 0 with Hessian
    -M (I - what what^T) M / |w|, so a safeguarded Newton step on the
    sphere converges quadratically where plain descent creeps (the hard
    tensors put the minimum close to the w = 0 kink, where the curvature
    scales like 1/|w| and fixed-step descent stalls).
    """
    r, d = nn.shape
    eye = np.eye(min(d - 1, 2))
    for _ in range(iters):
        nw = np.maximum(np.linalg.norm(w, axis=1), 1e-300)
        what = w / nw[:, None]
        g = aa - np.einsum("rde,re->rd", MM, what)
        gt = g - np.einsum("rd,rd->r", g, nn)[:, None] * nn
        gn = np.linalg.norm(gt, axis=1)
        act = gn > 1e-13 * (1.0 + np.abs(f))
        if not np.any(act):
            break
        if d == 2:
            U = np.stack([-nn[:, 1], nn[:, 0]], axis=1)[:, :, None]
        else:
            e = np.zeros_like(nn)
            e[np.arange(r), np.argmin(np.abs(nn), axis=1)] = 1.0
            u = e - np.einsum("rd,rd->r", e, nn)[:, None] * nn
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            U = np.stack([u, np.cross(nn, u)], axis=2)
        MU = np.einsum("rde,rek->rdk", MM, U)
        PU = MU - what[:, :, None] * np.einsum("rd,rdk->rk", what, MU)[:, None, :]
        Ht = -np.einsum("rdk,rdl->rkl", MU, PU) / nw[:, None, None]
        Ht -= np.einsum("rd,rd->r", g, nn)[:, None, None] * eye
        gtan = np.einsum("rdk,rd->rk", U, gt)
        if d == 2:
            h = Ht[:, 0, 0]
            pd = h > 1e-300
            delta = -gtan / np.where(pd, h, np.abs(h) + 1.0)[:, None]
        else:
            det = Ht[:, 0, 0] * Ht[:, 1, 1] - Ht[:, 0, 1] * Ht[:, 1, 0]
            pd = (det > 0) & (Ht[:, 0, 0] + Ht[:, 1, 1] > 0)
            dsafe = np.where(pd, det, 1.0)
            inv = np.empty_like(Ht)
            inv[:, 0, 0] = Ht[:, 1, 1] / dsafe
            inv[:, 1, 1] = Ht[:, 0, 0] / dsafe
            inv[:, 0, 1] = -Ht[:, 0, 1] / dsafe
            inv[:, 1, 0] = -Ht[:, 1, 0] / dsafe
            scale = 1.0 + np.abs(Ht).max(axis=(1, 2))
            delta = np.where(pd[:, None],
                             -np.einsum("rkl,rl->rk", inv, gtan),
                             -gtan / scale[:, None])
        moved = np.zeros(r, dtype=bool)
        t = 1.0
        for _ in range(8):
            todo = act & ~moved
            if not np.any(todo):
                break
            cand = nn[todo] + t * np.einsum("rdk,rk->rd", U[todo], delta[todo])
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            fc, wc = _pair_min_rows(cand, cc[todo], aa[todo], MM[todo])
            ok = fc < f[todo]
            iok = np.flatnonzero(todo)[ok]
            nn[iok] = cand[ok]
            f[iok] = fc[ok]
            w[iok] = wc[ok]
            moved[iok] = True
            t *= 0.5
        if not np.any(moved):
            break
    return nn, f


def _check_sym(T, n):
    T = np.asarray(T, dtype=float)
    if T.shape != (n, n):
        raise ValueError(f"tensor shape {T.shape} does not match dimension {n}")
    if np.max(np.abs(T - T.T)) > 1e-12 * max(1.0, float(np.max(np.abs(T)))):
        raise ValueError("tensor is not symmetric")
    return 0.5 * (T + T.T)


def dp1_check(point, w, tol_dp=TOL_DP, frame=None):
    """Decide w(k) >= 0 (or <= 0) over future causal k for a covector w."""
    E = orthonormal_frame(point) if frame is None else frame
    w = np.asarray(w, dtype=float)
    what = E.T @ w
    spatial = np.linalg.norm(what[1:])
    tol = tol_dp * max(1.0, float(np.linalg.norm(what)))
    margin = what[0] - spatial

    if spatial > 0.0:
        ndir = -what[1:] / spatial
    else:
        ndir = np.zeros(len(w) - 1)
        ndir[0] = 1.0
    khat = np.concatenate([[1.0], ndir])
    witness = (E @ khat,)

    if margin >= -tol:
        return DPVerdict(DPStatus.IN_DP_PLUS, float(margin), None, bool(abs(margin) <= tol))
    minus_margin = -what[0] - spatial
    if minus_margin >= -tol:
        return DPVerdict(DPStatus.IN_DP_MINUS, float(margin), witness, bool(abs(minus_margin) <= tol))
    return DPVerdict(DPStatus.NOT_DP, float(margin), witness, False)


def dp2_check(point, T, tol_dp=TOL_DP, frame=None):
    """Decide T(k, l) >= 0 over future null pairs for symmetric T."""
    E = orthonormal_frame(point) if frame is None else frame
    n = point.metric.dim
    T = _check_sym(T, n)
    That = E.T @ T @ E
    margin, nhat, mhat = dp2_margins(That[None])
    margin = float(margin[0])
    tol = tol_dp * max(1.0, float(np.max(np.abs(That))))
    k = E @ np.concatenate([[1.0], nhat[0]])
    l = E @ np.concatenate([[1.0], mhat[0]])

    if margin >= -tol:
        return DPVerdict(DPStatus.IN_DP_PLUS, margin, None, bool(abs(margin) <= tol))
    minus_margin, _, _ = dp2_margins(-That[None])
    if float(minus_margin[0]) >= -tol:
        return DPVerdict(DPStatus.IN_DP_MINUS, margin, (k, l), bool(abs(minus_margin[0]) <= tol))
    return DPVerdict(DPStatus.NOT_DP, margin, (k, l), False)


# ---------------------------------------------------------------------------
# single-sphere quadratic minimum (used by the flow null-cone check)


def null_quadratic_margins(Lhat, steps=POLISH_STEPS):
    """min over future null k = e0 + n of L(k, k) for stacked frame tensors."""
    Lhat = np.asarray(Lhat, dtype=float)
    N, n = Lhat.shape[0], Lhat.shape[-1]
    d = n - 1
    c = Lhat[:, 0, 0]
    a = Lhat[:, 0, 1:]
    M = Lhat[:, 1:, 1:]

    grid = sphere_directions(d)
    quad = np.einsum("gd,nde,ge->ng", grid, M, grid)
    vals = c[:, None] + 2.0 * (a @ grid.T) + quad
    best = np.argmin(vals, axis=1)
    margins = vals[np.arange(N), best]
    nhat = grid[best].copy()

    if d >= 2 and steps > 0:
        eta0 = 0.5 / (1.0 + _spectral_norm_sym(M))
        f = margins.copy()
        nn = nhat.copy()
        for _ in range(steps):
            grad = 2.0 * (a + np.einsum("nde,ne->nd", M, nn))
            gt = grad - np.einsum("nd,nd->n", grad, nn)[:, None] * nn
            gn = np.linalg.norm(gt, axis=1)
            active = gn > 1e-14 * (1.0 + np.abs(f))
            if not np.any(active):
                break
            step = eta0.copy()
            pending = active.copy()
            for _ in range(30):
                if not np.any(pending):
                    break
                cand = nn[pending] - step[pending, None] * gt[pending]
                cand /= np.linalg.norm(cand, axis=1, keepdims=True)
                fc = (c[pending] + 2.0 * np.einsum("rd,rd->r", a[pending], cand)
                      + np.einsum("rd,rde,re->r", cand, M[pending], cand))
                ok = fc < f[pending] - 1e-4 * step[pending] * gn[pending] ** 2
                iok = np.flatnonzero(pending)[ok]
                nn[iok] = cand[ok]
                f[iok] = fc[ok]
                rest = np.flatnonzero(pending)[~ok]
                pending[:] = False
                pending[rest] = True
                step[rest] *= 0.5
        upd = f < margins
        margins = np.where(upd, f, margins)
        nhat[upd] = nn[upd]
    return margins, nhat


# ---------------------------------------------------------------------------
# null eigenvectors and the conformal factor


def _null_directions_in_subspace(G, basis, tol):
    """Null directions of the restricted quadratic form on a subspace."""
    Q = basis.T @ G @ basis
    mu, U = np.linalg.eigh(0.5 * (Q + Q.T))
    scale = max(1.0, float(np.max(np.abs(mu))))
    out = []
    kernel = np.abs(mu) <= tol * scale
    for j in np.flatnonzero(kernel):
        out.append(basis @ U[:, j])
    pos = np.flatnonzero(mu > tol * scale)
    neg = np.flatnonzero(mu < -tol * scale)
    if len(pos) == 1:
        up = basis @ U[:, pos[0]] / np.sqrt(mu[pos[0]])
        for j in neg:
            un = basis @ U[:, j] / np.sqrt(-mu[j])
            out.append(up + un)
            out.append(up - un)
    return out


def null_eigenvectors(point, T, tol=TOL_DP, residual_tol=1e-10, frame=None):
    """Null directions X with T(., X) proportional to G(., X).

    Returns future representatives.  When T is a multiple of G every
    null direction qualifies; that degenerate spectrum is flagged and a
    basis of n independent null eigenvectors is returned.
    """
    G = point.metric.matrix
    n = point.metric.dim
    T = _check_sym(T, n)
    E = orthonormal_frame(point) if frame is None else frame
    A = np.linalg.solve(G, T)
    scale = max(1.0, float(np.max(np.abs(A))))

    lam0 = float(np.trace(A)) / n
    if np.max(np.abs(A - lam0 * np.eye(n))) <= tol * scale:
        basis = [E[:, 0] + E[:, j] for j in range(1, n)]
        basis.append(E[:, 0] - E[:, 1])
        pairs = tuple((lam0, v) for v in basis)
        return NullEigenResult(pairs, True)

    w, V = np.linalg.eig(A)
    candidates = []
    real = np.abs(w.imag) <= tol * scale
    for i in np.flatnonzero(real):
        v = V[:, i]
        if np.linalg.norm(v.imag) > 1e-8 * np.linalg.norm(v):
            continue
        candidates.append((float(w[i].real), v.real.copy()))

    # eigenvalue clusters: search each multi-dimensional eigenspace for
    # null directions the individual eigenvectors may have missed
    used = np.zeros(len(w), dtype=bool)
    for i in np.flatnonzero(real):
        if used[i]:
            continue
        group = np.flatnonzero(real & (np.abs(w - w[i]) <= 1e-6 * scale))
        used[group] = True
        if len(group) < 2:
            continue
        mat = V[:, group].real
        u, s, _ = np.linalg.svd(mat, full_matrices=False)
        rank = int(np.sum(s > 1e-8 * s[0]))
        basis = u[:, :rank]
        for v in _null_directions_in_subspace(G, basis, 1e-8):
            candidates.append((float(w[i].real), v))

    results = []
    for lam, v in candidates:
        v = v / np.linalg.norm(v)
        # one inverse-iteration step sharpens simple eigenpairs
        try:
            x = np.linalg.solve(A - lam * np.eye(n) + 1e-14 * scale * np.eye(n), v)
            x = x / np.linalg.norm(x)
            lam_x = float(x @ A @ x) / float(x @ x)
            if np.linalg.norm(A @ x - lam_x * x) < np.linalg.norm(A @ v - lam * v):
                v, lam = x, lam_x
        except np.linalg.LinAlgError:
            pass
        if np.linalg.norm(A @ v - lam * v) > residual_tol * scale:
            continue
        cls = classify(G, E, point.future, v)
        if cls not in (CausalClass.FUTURE_NULL, CausalClass.PAST_NULL):
            continue
        if cls is CausalClass.PAST_NULL:
            v = -v
        if any(abs(v @ u) > 1.0 - 1e-9 for _, u in results):
            continue
        results.append((lam, v))
    return NullEigenResult(tuple(results), False)


def dp_zero_test(point, T, X, tol=1e-8, frame=None):
    """Both sides of the zero-set equivalence for T in DPplus.

    Side one: T(X, X) vanishes.  Side two: X is a null eigenvector of T
    with respect to G.  Returns (value_zero, eigenvector) booleans; for
    tensors in DPplus the two must agree.
    """
    E = orthonormal_frame(point) if frame is None else frame
    verdict = dp2_check(point, T, frame=E)
    if verdict.status is not DPStatus.IN_DP_PLUS:
        raise ValueError(f"dp_zero_test needs a DPplus tensor, got {verdict.status.value}")
    cls = classify(point.metric.matrix, E, point.future, np.asarray(X, dtype=float))
    if not cls.is_future:
        raise ValueError(f"dp_zero_test needs a future causal X, got {cls.value}")

    G = point.metric.matrix
    T = _check_sym(T, point.metric.dim)
    Xh = np.linalg.solve(E, np.asarray(X, dtype=float))
    Xn = np.asarray(X, dtype=float) / np.linalg.norm(Xh)
    That = E.T @ T @ E
    t_scale = max(1.0, float(np.max(np.abs(That))))

    value_zero = abs(float(Xn @ T @ Xn)) <= tol * t_scale

    TX = T @ Xn
    GX = G @ Xn
    lam = float(GX @ TX) / float(GX @ GX)
    residual = float(np.linalg.norm(E.T @ (TX - lam * GX)))
    eigen = residual <= tol * t_scale
    return value_zero, eigen


def conformal_factor(point, T, tol=1e-8, frame=None):
    """Positive lambda with T = lambda * G, or None.

    The fit is the generalized trace tr(G^-1 T)/n; acceptance compares
    the residual in frame components against `tol`.
    """
    G = point.metric.matrix
    n = point.metric.dim
    T = _check_sym(T, n)
    E = orthonormal_frame(point) if frame is None else frame
    lam = float(np.trace(np.linalg.solve(G, T))) / n
    That = E.T @ T @ E
    resid = np.max(np.abs(That - lam * np.diag([1.0] + [-1.0] * (n - 1))))
    if resid <= tol * max(1.0, float(np.max(np.abs(That)))) and lam > 0.0:
        return lam
    return None
