"""One-parameter families of self-maps and their infinitesimal data.

A flow is a coordinate family phi_s reducing to the identity at s = 0.
Freezing s gives an ordinary self-map, so causality along the flow is
decided by the sampled machinery in `relate`, one parameter value at a
time.  The generator and all metric derivatives come from forward-mode
duals; nothing here is finite-differenced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dp import TOL_DP, null_quadratic_margins
from .exprcore import eval_dual, eval_expr, free_symbols, parse_expr, seed_env, substitute
from .lorentz import frames
from .relate import MapDef, Verdict, Witness, check_proper_causal

IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class FlowDef:
    """Family of self-maps phi_s on one chart; identity at s = 0."""

    spacetime: object
    s_symbol: str
    exprs: tuple
    s_range: tuple
    params: dict

    def __post_init__(self):
        st = self.spacetime
        if len(self.exprs) != st.n:
            raise ValueError("one expression per coordinate required")
        if self.s_symbol in st.coords or self.s_symbol in self.params:
            raise ValueError(f"flow parameter '{self.s_symbol}' shadows another symbol")
        if not self.s_range[0] <= 0.0 <= self.s_range[1]:
            raise ValueError("s_range must contain 0")
        allowed = set(st.coords) | set(self.params) | {self.s_symbol}
        for coord, e in zip(st.coords, self.exprs):
            stray = free_symbols(e) - allowed
            if stray:
                raise ValueError(f"flow component '{coord}' references unknown symbols {sorted(stray)}")

    @classmethod
    def create(cls, spacetime, s_symbol, exprs, s_range, params=()):
        params = dict(params)
        symbols = tuple(spacetime.coords) + tuple(params) + (s_symbol,)
        missing = [c for c in spacetime.coords if c not in exprs]
        if missing:
            raise ValueError(f"flow lacks components for {missing}")
        parsed = tuple(parse_expr(exprs[c], symbols) for c in spacetime.coords)
        return cls(spacetime, s_symbol, parsed, (float(s_range[0]), float(s_range[1])), params)


@dataclass(frozen=True)
class GeneratorField:
    """Vector field given by one expression per coordinate."""

    spacetime: object
    exprs: tuple

    def __post_init__(self):
        st = self.spacetime
        if len(self.exprs) != st.n:
            raise ValueError("one expression per coordinate required")
        allowed = set(st.coords) | set(st.params)
        for e in self.exprs:
            stray = free_symbols(e) - allowed
            if stray:
                raise ValueError(f"generator references unknown symbols {sorted(stray)}")

    @classmethod
    def create(cls, spacetime, exprs):
        # a bare iterable is taken in coordinate order; a dict by name
        if isinstance(exprs, dict):
            missing = [c for c in spacetime.coords if c not in exprs]
            if missing:
                raise ValueError(f"generator lacks components for {missing}")
            exprs = tuple(exprs[c] for c in spacetime.coords)
        symbols = tuple(spacetime.coords) + tuple(spacetime.params)
        return cls(spacetime, tuple(parse_expr(src, symbols) for src in exprs))

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        env = {name: pts[..., i] for i, name in enumerate(self.spacetime.coords)}
        env.update(self.spacetime.params)
        out = np.zeros(pts.shape)
        for i, e in enumerate(self.exprs):
            out[..., i] = eval_expr(e, env)
        return out


def verify_identity(flow, pts, tol=IDENTITY_TOL):
    """Check phi_0 = id on the given points; raises when the residual exceeds tol."""
    img = flow_map(flow, 0.0).image(pts)
    pts = np.asarray(pts, dtype=float)
    resid = np.abs(img - pts) / np.maximum(1.0, np.abs(pts))
    worst = float(np.max(resid))
    if worst > tol:
        i = int(np.argmax(resid.max(axis=-1))) if resid.ndim > 1 else 0
        raise ValueError(
            f"flow is not the identity at s = 0 (residual {worst:.3e} at sample {i})"
        )


def flow_map(flow, s):
    """The self-map at one frozen parameter value.

    The value is substituted into the expressions rather than kept as a
    parameter, so maps at different s compose without name clashes.
    """
    lo, hi = flow.s_range
    if not lo <= s <= hi:
        raise ValueError(f"s = {s} outside the declared range [{lo}, {hi}]")
    sval = parse_expr(repr(float(s)), ())
    exprs = tuple(substitute(e, {flow.s_symbol: sval}) for e in flow.exprs)
    return MapDef(flow.spacetime, flow.spacetime, exprs, dict(flow.params))


def generator(flow, pts):
    """d(phi_s)/ds at s = 0, one row per point."""
    pts = np.asarray(pts, dtype=float)
    env = seed_env(flow.spacetime.coords, pts, flow.params, extra={flow.s_symbol: 0.0})
    out = np.zeros(pts.shape)
    for i, e in enumerate(flow.exprs):
        out[..., i] = eval_dual(e, env).deriv[..., -1]
    return out


def lie_derivative_metric(st, xi, pts):
    """Lie derivative of the metric along xi at the given point(s).

    (L_xi g)_ab = xi^c d_c g_ab + g_cb d_a xi^c + g_ac d_b xi^c, with all
    partials taken by dual seeding of the coordinate symbols.
    """
    if xi.spacetime.name != st.name:
        raise ValueError("generator field belongs to a different spacetime")
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    P = pts[None] if single else pts
    n = st.n
    lead = P.shape[:-1]

    env = seed_env(st.coords, P, st.params)
    G = np.zeros(lead + (n, n))
    dG = np.zeros(lead + (n, n, n))
    for (i, j), e in st.metric.items():
        r = eval_dual(e, env)
        G[..., i, j] = r.value
        dG[..., i, j, :] = r.deriv
        if i != j:
            G[..., j, i] = r.value
            dG[..., j, i, :] = r.deriv

    xiv = np.zeros(lead + (n,))
    dxi = np.zeros(lead + (n, n))
    for c, e in enumerate(xi.exprs):
        r = eval_dual(e, env)
        xiv[..., c] = r.value
        dxi[..., c, :] = r.deriv

    lie = np.einsum("...c,...abc->...ab", xiv, dG)
    lie += np.einsum("...cb,...ca->...ab", G, dxi)
    lie += np.einsum("...ac,...cb->...ab", G, dxi)
    return lie[0] if single else lie


@dataclass(frozen=True)
class FlowStep:
    s: float
    verdict: Verdict
    min_margin: float | None
    lam_range: tuple | None

    def to_dict(self):
        return {
            "s": float(self.s),
            "verdict": self.verdict.value,
            "min_margin": None if self.min_margin is None else float(self.min_margin),
            "lam_range": None if self.lam_range is None
            else [float(self.lam_range[0]), float(self.lam_range[1])],
        }


@dataclass(frozen=True)
class SubmonoidReport:
    steps: tuple
    interval: tuple
    group: bool
    conformal_group: bool | None
    samples_checked: int

    def to_dict(self):
        return {
            "steps": [s.to_dict() for s in self.steps],
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "group": bool(self.group),
            "conformal_group": self.conformal_group,
            "samples_checked": int(self.samples_checked),
        }


def check_submonoid(flow, s_grid, sampler, tol_dp=TOL_DP, threads=None):
    """Per-parameter causality of the flow and the maximal verified interval.

    Runs the sampled proper-causal check at every grid value and returns
    the largest contiguous block of holding values around s = 0 (closed
    at the last verified grid point).  Evaluation failures count as
    non-holding.  When every value of both signs holds, the family is
    flagged as a group and the per-s conformal summaries are combined
    (a sampled instance of: causal groups act conformally).
    """
    pts = sampler.points()
    verify_identity(flow, pts)
    grid = sorted(float(s) for s in s_grid)
    if not any(abs(s) < 1e-15 for s in grid):
        grid = sorted(grid + [0.0])

    steps = []
    holds = []
    conformal_flags = []
    for s in grid:
        r = check_proper_causal(flow_map(flow, s), sampler, tol_dp=tol_dp, threads=threads)
        lam = r.conformal.lam_range if r.conformal is not None else None
        steps.append(FlowStep(s, r.verdict, r.min_margin, lam))
        holds.append(r.verdict is Verdict.HOLDS_SAMPLED)
        conformal_flags.append(bool(r.conformal is not None and r.conformal.everywhere))

    i0 = min(range(len(grid)), key=lambda i: abs(grid[i]))
    if not holds[i0]:
        raise ArithmeticError("the identity map itself failed the causality check")
    lo = i0
    while lo > 0 and holds[lo - 1]:
        lo -= 1
    hi = i0
    while hi + 1 < len(grid) and holds[hi + 1]:
        hi += 1
    group = all(holds) and grid[0] < 0.0 < grid[-1]
    conformal_group = all(conformal_flags) if group else None
    return SubmonoidReport(tuple(steps), (grid[lo], grid[hi]), group, conformal_group, len(pts))


@dataclass(frozen=True)
class NullConeReport:
    nonnegative: bool
    min_margin: float
    witnesses: tuple
    samples_checked: int

    def to_dict(self):
        return {
            "nonnegative": bool(self.nonnegative),
            "min_margin": float(self.min_margin),
            "witnesses": [w.to_dict() for w in self.witnesses],
            "samples_checked": int(self.samples_checked),
        }


def null_cone_nonneg(st, xi, sampler, tol=TOL_DP):
    """Sign of (L_xi g)(k, k) minimized over future null k at each sample."""
    pts = sampler.points()
    G = st.metric_at(pts)
    fut = st.orientation_at(pts)
    E = frames(G, fut)
    L = lie_derivative_metric(st, xi, pts)
    Lhat = np.einsum("nki,nkl,nlj->nij", E, L, E)
    margins, nhat = null_quadratic_margins(Lhat)
    scale = np.maximum(1.0, np.abs(Lhat).max(axis=(1, 2)))
    ok = margins >= -tol * scale

    witnesses = ()
    if not np.all(ok):
        order = np.argsort(margins, kind="stable")
        bad = [int(i) for i in order if not ok[i]][:16]
        ones = np.ones((len(bad), 1))
        ks = np.einsum("nij,nj->ni", E[bad], np.concatenate([ones, nhat[bad]], axis=1))
        witnesses = tuple(
            Witness(pts[i], (ks[r],), float(margins[i])) for r, i in enumerate(bad)
        )
    return NullConeReport(bool(np.all(ok)), float(margins.min()), witnesses, len(pts))
