"""Sampled verification of causal-cone inclusion for maps between spacetimes.

A map between two Lorentzian charts preserves causality when the
pullback of the target metric satisfies the dominant property with
respect to the source metric at every point, and the pushed time
orientation lands in the future half-cone.  Neither condition can be
certified universally by sampling, so the verdict vocabulary is
explicit about scope: HOLDS_SAMPLED speaks only for the points checked,
VIOLATED carries concrete witnesses.

The pipeline is batched: expressions evaluate over the whole sample
set, Jacobians come from forward-mode duals, frames from a stacked
eigendecomposition, and the cone check from the vectorized null-pair
search in `dp`.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dp import TOL_DP, DPStatus, dp2_check, dp2_margins, null_eigenvectors
from .exprcore import (
    EvalDomainError,
    SingularJacobianError,
    eval_dual,
    eval_expr,
    free_symbols,
    parse_expr,
    seed_env,
    substitute,
)
from .lorentz import (
    TOL_NULL,
    CausalClass,
    OrientedPoint,
    classify,
    frames,
    validate_metric,
)

TOL_CONF = 1e-8
DEFAULT_SAMPLES = 4096
DEFAULT_MARGIN = 1e-3
INF_WINDOW = 10.0

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


class Verdict(enum.Enum):
    HOLDS_SAMPLED = "HOLDS_SAMPLED"
    TIME_REVERSED = "TIME_REVERSED"
    VIOLATED = "VIOLATED"
    ERROR = "ERROR"


def _ident(name):
    return name.isidentifier() and not name[0].isdigit()


# ---------------------------------------------------------------------------
# definitions


@dataclass(frozen=True)
class SpacetimeDef:
    """A single coordinate chart with metric and declared future field.

    `metric` maps lower-triangle index pairs (i, j), i >= j, to
    expression trees in the coordinates and parameters; missing entries
    are zero.  `orientation` holds the components of a future-pointing
    causal vector field.  `exclusions` are expressions that must stay
    bounded away from zero on any sampling window (coordinate
    singularities such as sin(theta)).
    """

    name: str
    coords: tuple
    domain: tuple
    params: dict
    metric: dict
    orientation: tuple
    exclusions: tuple = ()

    def __post_init__(self):
        n = len(self.coords)
        if n < 2:
            raise ValueError("a spacetime needs at least two coordinates")
        if len(set(self.coords)) != n:
            raise ValueError("coordinate names must be distinct")
        if len(self.domain) != n:
            raise ValueError("one domain interval per coordinate required")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"empty domain interval ({lo}, {hi})")
        if len(self.orientation) != n:
            raise ValueError("orientation needs one component per coordinate")
        allowed = set(self.coords) | set(self.params)
        for (i, j), e in self.metric.items():
            if not (0 <= j <= i < n):
                raise ValueError(f"metric index [{i}][{j}] outside lower triangle")
            self._check_symbols(e, allowed, f"metric[{i}][{j}]")
        for k, e in enumerate(self.orientation):
            self._check_symbols(e, allowed, f"orientation[{k}]")
        for e in self.exclusions:
            self._check_symbols(e, allowed, "exclusion")

    @staticmethod
    def _check_symbols(expr, allowed, what):
        stray = free_symbols(expr) - allowed
        if stray:
            raise ValueError(f"{what} references unknown symbols {sorted(stray)}")

    @classmethod
    def create(cls, name, coords, domain, params, metric, orientation, exclusions=()):
        """Parse a definition given as strings.

        `metric` maps (i, j) to expression text, `domain` maps coordinate
        name to (lo, hi), `orientation` and `exclusions` are expression
        text sequences.
        """
        coords = tuple(coords)
        params = dict(params)
        symbols = coords + tuple(params)
        dom = tuple((float(domain[c][0]), float(domain[c][1])) for c in coords)
        met = {(int(i), int(j)): parse_expr(src, symbols) for (i, j), src in metric.items()}
        ori = tuple(parse_expr(src, symbols) for src in orientation)
        exc = tuple(parse_expr(src, symbols) for src in exclusions)
        return cls(name, coords, dom, params, met, ori, exc)

    @property
    def n(self):
        return len(self.coords)

    def _env(self, pts):
        env = {name: pts[..., i] for i, name in enumerate(self.coords)}
        env.update(self.params)
        return env

    def metric_at(self, pts):
        """Metric matrix (…, n, n) at one point (n,) or a batch (N, n)."""
        pts = np.asarray(pts, dtype=float)
        env = self._env(pts)
        lead = pts.shape[:-1]
        G = np.zeros(lead + (self.n, self.n))
        for (i, j), e in self.metric.items():
            val = eval_expr(e, env)
            G[..., i, j] = val
            if i != j:
                G[..., j, i] = val
        return G

    def orientation_at(self, pts):
        pts = np.asarray(pts, dtype=float)
        env = self._env(pts)
        lead = pts.shape[:-1]
        out = np.zeros(lead + (self.n,))
        for i, e in enumerate(self.orientation):
            out[..., i] = eval_expr(e, env)
        return out

    def contains(self, pts):
        """Strict-interior test; broadcasts over a leading batch axis."""
        pts = np.asarray(pts, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(self.domain):
            ok &= (pts[..., i] > lo) & (pts[..., i] < hi)
        return ok

    def point(self, x):
        """OrientedPoint at coordinates x (validates the metric there)."""
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise ValueError(f"point {x.tolist()} outside the domain of '{self.name}'")
        return OrientedPoint(x, validate_metric(self.metric_at(x)), self.orientation_at(x))

    def validate_on(self, pts):
        """Signature and orientation checks over a batch; raises on failure."""
        pts = np.asarray(pts, dtype=float)
        G = self.metric_at(pts)
        _require_lorentzian(G, f"metric of '{self.name}'")
        fut = self.orientation_at(pts)
        _require_future_causal(G, fut, f"orientation of '{self.name}'")


@dataclass(frozen=True)
class MapDef:
    """A smooth map between charts, one target-coordinate expression each."""

    source: SpacetimeDef
    target: SpacetimeDef
    exprs: tuple
    params: dict

    def __post_init__(self):
        if len(self.exprs) != self.target.n:
            raise ValueError("one expression per target coordinate required")
        allowed = set(self.source.coords) | set(self.params)
        for coord, e in zip(self.target.coords, self.exprs):
            stray = free_symbols(e) - allowed
            if stray:
                raise ValueError(f"map component '{coord}' references unknown symbols {sorted(stray)}")

    @classmethod
    def create(cls, source, target, exprs, params=()):
        """Parse map components given as {target coord: expression text}."""
        params = dict(params)
        symbols = tuple(source.coords) + tuple(params)
        missing = [c for c in target.coords if c not in exprs]
        if missing:
            raise ValueError(f"map lacks components for {missing}")
        parsed = tuple(parse_expr(exprs[c], symbols) for c in target.coords)
        return cls(source, target, parsed, params)

    def image(self, pts):
        pts = np.asarray(pts, dtype=float)
        env = {name: pts[..., i] for i, name in enumerate(self.source.coords)}
        env.update(self.params)
        lead = pts.shape[:-1]
        out = np.zeros(lead + (self.target.n,))
        for i, e in enumerate(self.exprs):
            out[..., i] = eval_expr(e, env)
        return out

    def image_and_jacobian(self, pts):
        """Image points and Jacobians d(target)/d(source), batched."""
        pts = np.asarray(pts, dtype=float)
        env = seed_env(self.source.coords, pts, self.params)
        lead = pts.shape[:-1]
        n = self.source.n
        img = np.zeros(lead + (self.target.n,))
        J = np.zeros(lead + (self.target.n, n))
        for i, e in enumerate(self.exprs):
            r = eval_dual(e, env)
            img[..., i] = r.value
            J[..., i, :] = r.deriv
        return img, J


def compose_maps(f, g):
    """Composite running f first, then g; requires f.target to be g.source."""
    if f.target.name != g.source.name or f.target.coords != g.source.coords:
        raise ValueError(
            f"cannot compose: first map lands in '{f.target.name}', "
            f"second expects '{g.source.name}'"
        )
    params = dict(f.params)
    for k, v in g.params.items():
        if k in params and params[k] != v:
            raise ValueError(f"parameter '{k}' bound to both {params[k]} and {v}")
        params[k] = v
    mapping = dict(zip(g.source.coords, f.exprs))
    exprs = tuple(substitute(e, mapping) for e in g.exprs)
    return MapDef(f.source, g.target, exprs, params)


# ---------------------------------------------------------------------------
# sampling


def _radical_inverse(indices, base):
    idx = np.array(indices, dtype=np.int64)
    out = np.zeros(idx.shape)
    f = 1.0 / base
    while np.any(idx > 0):
        out += f * (idx % base)
        idx //= base
        f /= base
    return out


@dataclass(frozen=True)
class RegionSampler:
    """Deterministic point source strictly inside a chart's domain.

    The sampling window per coordinate is the declared domain (or the
    supplied override), shrunk by `margin` at finite ends; infinite ends
    are cut at +-`inf_window` and that coordinate is drawn through a
    tanh-shaped reparameterization that thins samples toward the cut.
    Scheme "halton" uses the low-discrepancy Halton sequence (prime base
    per coordinate, index block chosen by `seed`) with the first point
    replaced by the window center; "grid" emits cell centers of a
    near-cubical lattice, rounding the count.
    """

    spacetime: SpacetimeDef
    count: int = DEFAULT_SAMPLES
    scheme: str = "halton"
    seed: int = 0
    margin: float = DEFAULT_MARGIN
    window: tuple = ()
    warped: tuple = ()

    @classmethod
    def build(cls, spacetime, count=DEFAULT_SAMPLES, scheme="halton", seed=0,
              margin=DEFAULT_MARGIN, window=None, inf_window=INF_WINDOW):
        window = dict(window or {})
        stray = set(window) - set(spacetime.coords)
        if stray:
            raise ValueError(f"window names unknown coordinates {sorted(stray)}")
        if scheme not in ("halton", "grid"):
            raise ValueError(f"unknown sampling scheme '{scheme}'")
        if spacetime.n > len(_PRIMES):
            raise ValueError("too many coordinates for the Halton base table")
        resolved = []
        warped = []
        for i, c in enumerate(spacetime.coords):
            dlo, dhi = spacetime.domain[i]
            lo, hi = window.get(c, (dlo, dhi))
            if not (dlo <= lo < hi <= dhi):
                raise ValueError(f"window for '{c}' not inside the domain")
            warp = np.isinf(lo) or np.isinf(hi)
            lo = max(lo, -inf_window)
            hi = min(hi, inf_window)
            if np.isfinite(dlo) and lo == dlo:
                lo += margin
            if np.isfinite(dhi) and hi == dhi:
                hi -= margin
            if not lo < hi:
                raise ValueError(f"window for '{c}' collapsed by margins")
            resolved.append((float(lo), float(hi)))
            warped.append(bool(warp))
        return cls(spacetime, int(count), scheme, int(seed), float(margin),
                   tuple(resolved), tuple(warped))

    def points(self):
        n = self.spacetime.n
        if self.scheme == "grid":
            m = max(2, int(round(self.count ** (1.0 / n))))
            axes = [(np.arange(m) + 0.5) / m for _ in range(n)]
            mesh = np.meshgrid(*axes, indexing="ij")
            u = np.stack([a.ravel() for a in mesh], axis=1)
        else:
            start = self.seed * self.count + 1
            idx = np.arange(start, start + self.count)
            u = np.stack([_radical_inverse(idx, _PRIMES[i]) for i in range(n)], axis=1)
            u[0] = 0.5
        pts = np.empty_like(u)
        for i, (lo, hi) in enumerate(self.window):
            ui = u[:, i]
            if self.warped[i]:
                ui = (np.arctanh(np.tanh(1.5) * (2.0 * ui - 1.0)) / 1.5 + 1.0) / 2.0
            pts[:, i] = lo + (hi - lo) * ui
        self._guard(pts)
        return pts

    def _guard(self, pts):
        if not np.all(self.spacetime.contains(pts)):
            raise ValueError("sampler emitted a point outside the domain")
        env = self.spacetime._env(pts)
        for e in self.spacetime.exclusions:
            vals = np.abs(np.asarray(eval_expr(e, env), dtype=float))
            if np.min(vals) < 0.5 * self.margin:
                raise ValueError("sampling window touches an excluded singular locus")


@dataclass(frozen=True)
class UnionSampler:
    """Concatenation of samplers over the same chart (e.g. a boundary band)."""

    parts: tuple

    def __post_init__(self):
        names = {p.spacetime.name for p in self.parts}
        if len(self.parts) == 0 or len(names) != 1:
            raise ValueError("union parts must share one spacetime")

    @property
    def spacetime(self):
        return self.parts[0].spacetime

    @property
    def count(self):
        return sum(p.count for p in self.parts)

    def points(self):
        return np.concatenate([p.points() for p in self.parts], axis=0)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Witness:
    point: np.ndarray
    vectors: tuple
    margin: float

    def to_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "vectors": [[float(c) for c in v] for v in self.vectors],
            "margin": float(self.margin),
        }


@dataclass(frozen=True)
class ConformalSummary:
    everywhere: bool
    lam_range: tuple | None
    lambdas: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "everywhere": bool(self.everywhere),
            "lam_range": None if self.lam_range is None
            else [float(self.lam_range[0]), float(self.lam_range[1])],
        }


@dataclass(frozen=True)
class RelationReport:
    verdict: Verdict
    samples_checked: int
    min_margin: float | None
    witnesses: tuple
    conformal: ConformalSummary | None
    error: str | None = None

    @property
    def holds(self):
        return self.verdict is Verdict.HOLDS_SAMPLED

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "samples_checked": int(self.samples_checked),
            "min_margin": None if self.min_margin is None else float(self.min_margin),
            "witnesses": [w.to_dict() for w in self.witnesses],
            "conformal": None if self.conformal is None else self.conformal.to_dict(),
            "error": self.error,
        }


# ---------------------------------------------------------------------------
# batched validity helpers


def _require_lorentzian(G, what):
    w = np.linalg.eigvalsh(G)
    scale = np.maximum(np.abs(w).max(axis=-1, keepdims=True), 1e-300)
    zero = np.abs(w) <= 1e-12 * scale
    npos = np.sum((w > 0) & ~zero, axis=-1)
    nneg = np.sum((w < 0) & ~zero, axis=-1)
    ok = (npos == 1) & (nneg == G.shape[-1] - 1)
    if not np.all(ok):
        i = int(np.flatnonzero(~np.atleast_1d(ok))[0])
        raise ValueError(f"{what} loses Lorentzian signature at sample {i}")


def _require_future_causal(G, fut, what):
    q = np.einsum("...i,...ij,...j->...", fut, G, fut)
    scale = np.einsum("...i,...i->...", fut, fut) * np.abs(G).max(axis=(-2, -1))
    ok = (scale > 0) & (q >= -TOL_NULL * scale)
    if not np.all(ok):
        i = int(np.flatnonzero(~np.atleast_1d(ok))[0])
        raise ValueError(f"{what} is not future causal at sample {i}")


def _first_outside(target, img):
    inside = target.contains(img)
    i = int(np.flatnonzero(~np.atleast_1d(inside))[0])
    x = np.atleast_2d(img)[i]
    for k, (lo, hi) in enumerate(target.domain):
        if not (lo < x[k] < hi):
            return i, target.coords[k], float(x[k]), (lo, hi)
    return i, "?", float("nan"), (float("nan"), float("nan"))


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get("CAUSALKIT_THREADS", "1")))


def _dp2_margins_split(That, threads):
    k = _thread_count(threads)
    if k <= 1 or len(That) < 256:
        return dp2_margins(That)
    chunks = np.array_split(np.arange(len(That)), k)
    with ThreadPoolExecutor(max_workers=k) as pool:
        results = list(pool.map(lambda ix: dp2_margins(That[ix]), chunks))
    margins = np.concatenate([r[0] for r in results])
    nhat = np.concatenate([r[1] for r in results])
    mhat = np.concatenate([r[2] for r in results])
    return margins, nhat, mhat


def _conformal_summary(G, T, tol=TOL_CONF):
    n = G.shape[-1]
    lam = np.einsum("nii->n", np.linalg.solve(G, T)) / n
    resid = np.abs(T - lam[:, None, None] * G).max(axis=(1, 2))
    scale = np.maximum(np.abs(T).max(axis=(1, 2)), 1e-300)
    ok = (resid / scale < tol) & (lam > 0)
    lambdas = np.where(ok, lam, np.nan)
    rng = None
    if np.any(ok):
        rng = (float(np.nanmin(lambdas)), float(np.nanmax(lambdas)))
    return ConformalSummary(bool(np.all(ok)), rng, lambdas)


# ---------------------------------------------------------------------------
# operations


def pullback_metric(mapdef, x):
    """Pullback of the target metric at one source point: J^T G~ J."""
    x = np.asarray(x, dtype=float)
    if not mapdef.source.contains(x):
        raise ValueError(f"point {x.tolist()} outside the source domain")
    img, J = mapdef.image_and_jacobian(x)
    if not mapdef.target.contains(img):
        raise ValueError(f"image {img.tolist()} outside the target domain")
    scale = max(1.0, float(np.max(np.abs(J))))
    if abs(np.linalg.det(J)) < 1e-12 * scale ** J.shape[0]:
        raise SingularJacobianError(f"map Jacobian singular at {x.tolist()}")
    Gt = mapdef.target.metric_at(img)
    T = J.T @ Gt @ J
    return 0.5 * (T + T.T)


def check_proper_causal(mapdef, sampler, tol_dp=TOL_DP, threads=None):
    """Sampled test that the map sends future cones into future cones.

    Every sample must give a pullback satisfying the dominant property
    and a pushed orientation landing in the future half-cone of the
    target.  Any cone violation yields VIOLATED with up to 16 witnesses
    sorted worst-first; a consistently past-pointing push yields
    TIME_REVERSED; evaluation, domain, signature, orientation, or
    Jacobian failures yield ERROR carrying the first failure.
    """
    if sampler.spacetime.name != mapdef.source.name:
        raise ValueError("sampler chart does not match the map source")
    pts = sampler.points()
    N = len(pts)
    try:
        G = mapdef.source.metric_at(pts)
        _require_lorentzian(G, "source metric")
        fut = mapdef.source.orientation_at(pts)
        _require_future_causal(G, fut, "source orientation")

        img, J = mapdef.image_and_jacobian(pts)
        if not np.all(mapdef.target.contains(img)):
            i, coord, val, (lo, hi) = _first_outside(mapdef.target, img)
            raise ValueError(
                f"image leaves the target domain at sample {i}: "
                f"{coord} = {val} not in ({lo}, {hi})"
            )
        dets = np.linalg.det(J)
        jscale = np.maximum(1.0, np.abs(J).max(axis=(1, 2))) ** J.shape[-1]
        if np.any(np.abs(dets) < 1e-12 * jscale):
            i = int(np.flatnonzero(np.abs(dets) < 1e-12 * jscale)[0])
            raise SingularJacobianError(f"map Jacobian singular at sample {i}")

        Gt = mapdef.target.metric_at(img)
        _require_lorentzian(Gt, "target metric at image")
        futW = mapdef.target.orientation_at(img)
        _require_future_causal(Gt, futW, "target orientation at image")

        E = frames(G, fut)
        T = np.einsum("nai,nab,nbj->nij", J, Gt, J)
        T = 0.5 * (T + np.transpose(T, (0, 2, 1)))
        That = np.einsum("nki,nkl,nlj->nij", E, T, E)
        margins, nhat, mhat = _dp2_margins_split(That, threads)

        pushed = np.einsum("nai,ni->na", J, fut)
        Ew = frames(Gt, futW)
        classes = classify(Gt, Ew, futW, pushed)
        conformal = _conformal_summary(G, T)
    except (EvalDomainError, SingularJacobianError, ArithmeticError, ValueError) as e:
        return RelationReport(Verdict.ERROR, N, None, (), None, error=str(e))

    scale = np.maximum(1.0, np.abs(That).max(axis=(1, 2)))
    ok = margins >= -tol_dp * scale
    min_margin = float(margins.min())

    if not np.all(ok):
        order = np.argsort(margins, kind="stable")
        bad = [int(i) for i in order if not ok[i]][:16]
        ones = np.ones((len(bad), 1))
        ks = np.einsum("nij,nj->ni", E[bad], np.concatenate([ones, nhat[bad]], axis=1))
        ls = np.einsum("nij,nj->ni", E[bad], np.concatenate([ones, mhat[bad]], axis=1))
        wit = tuple(
            Witness(pts[i], (ks[r], ls[r]), float(margins[i]))
            for r, i in enumerate(bad)
        )
        return RelationReport(Verdict.VIOLATED, N, min_margin, wit, conformal)

    signs = np.array([1 if c.is_future else (-1 if c.is_causal else 0) for c in classes])
    if np.all(signs == 1):
        return RelationReport(Verdict.HOLDS_SAMPLED, N, min_margin, (), conformal)
    if np.all(signs == -1):
        return RelationReport(Verdict.TIME_REVERSED, N, min_margin, (), conformal)
    i = int(np.flatnonzero(signs != signs[0])[0]) if signs[0] != 0 else 0
    return RelationReport(
        Verdict.ERROR, N, min_margin, (), conformal,
        error=f"pushed orientation is inconsistent across samples (first breach at sample {i})",
    )


def canonical_null_directions(mapdef, x):
    """Null directions whose push-forward stays null, at one point.

    Requires the pullback to satisfy the dominant property at x.  Each
    reported direction is cross-checked by classifying its push-forward
    in the target chart.
    """
    x = np.asarray(x, dtype=float)
    p = mapdef.source.point(x)
    T = pullback_metric(mapdef, x)
    verdict = dp2_check(p, T)
    if verdict.status is not DPStatus.IN_DP_PLUS:
        raise ValueError(
            f"canonical null directions need an InDPplus pullback, got "
            f"{verdict.status.value} (margin {verdict.margin:.3e})"
        )
    res = null_eigenvectors(p, T)
    img, J = mapdef.image_and_jacobian(x)
    q = mapdef.target.point(img)
    for lam, v in res.pairs:
        cls = classify(q.metric.matrix, frames(q.metric.matrix, q.future), q.future, J @ v)
        if cls not in (CausalClass.FUTURE_NULL, CausalClass.PAST_NULL):
            raise ArithmeticError(
                f"push-forward of a reported null direction classifies {cls.value}"
            )
    return res


@dataclass(frozen=True)
class ConformalReport:
    everywhere: bool
    lam_range: tuple | None
    lambdas: np.ndarray = field(repr=False)
    samples_checked: int = 0

    def to_dict(self):
        return {
            "everywhere": bool(self.everywhere),
            "lam_range": None if self.lam_range is None
            else [float(self.lam_range[0]), float(self.lam_range[1])],
            "samples_checked": int(self.samples_checked),
        }


def check_conformal(mapdef, sampler):
    """Per-sample conformal factor of the pullback, with overall flag."""
    pts = sampler.points()
    G = mapdef.source.metric_at(pts)
    img, J = mapdef.image_and_jacobian(pts)
    if not np.all(mapdef.target.contains(img)):
        i, coord, val, (lo, hi) = _first_outside(mapdef.target, img)
        raise ValueError(
            f"image leaves the target domain at sample {i}: "
            f"{coord} = {val} not in ({lo}, {hi})"
        )
    Gt = mapdef.target.metric_at(img)
    T = np.einsum("nai,nab,nbj->nij", J, Gt, J)
    T = 0.5 * (T + np.transpose(T, (0, 2, 1)))
    s = _conformal_summary(G, T)
    return ConformalReport(s.everywhere, s.lam_range, s.lambdas, len(pts))


@dataclass(frozen=True)
class IsoReport:
    isomorphic: bool
    forward: RelationReport
    backward: RelationReport
    time_reversed: bool
    inverse_verified: bool
    conformal: ConformalReport | None

    def to_dict(self):
        return {
            "isomorphic": bool(self.isomorphic),
            "forward": self.forward.to_dict(),
            "backward": self.backward.to_dict(),
            "time_reversed": bool(self.time_reversed),
            "inverse_verified": bool(self.inverse_verified),
            "conformal": None if self.conformal is None else self.conformal.to_dict(),
        }


def check_isomorphism(fwd, bwd, sampler_fwd, sampler_bwd, tol_dp=TOL_DP, threads=None):
    """Proper-causal check in both directions; conformal factor when
    the backward map is numerically the inverse of the forward one."""
    rf = check_proper_causal(fwd, sampler_fwd, tol_dp=tol_dp, threads=threads)
    rb = check_proper_causal(bwd, sampler_bwd, tol_dp=tol_dp, threads=threads)
    holds = {Verdict.HOLDS_SAMPLED, Verdict.TIME_REVERSED}
    iso = rf.verdict in holds and rb.verdict in holds
    reversed_ = Verdict.TIME_REVERSED in (rf.verdict, rb.verdict)

    inverse_ok = False
    conf = None
    if iso:
        pts = sampler_fwd.points()
        back = bwd.image(fwd.image(pts))
        resid = np.abs(back - pts) / np.maximum(1.0, np.abs(pts))
        inverse_ok = bool(np.max(resid) < 1e-8)
        if inverse_ok:
            conf = check_conformal(fwd, sampler_fwd)
    return IsoReport(iso, rf, rb, reversed_, inverse_ok, conf)


def curve_pushforward_check(mapdef, curve, u_values):
    """True when the pushed tangent of a future timelike curve stays
    future timelike in the target at every parameter sample.

    `curve` gives one expression per source coordinate in the parameter
    `u` (strings or parsed trees).
    """
    exprs = tuple(
        parse_expr(c, ("u",)) if isinstance(c, str) else c for c in curve
    )
    if len(exprs) != mapdef.source.n:
        raise ValueError("one curve component per source coordinate required")
    u = np.atleast_1d(np.asarray(u_values, dtype=float))
    env = seed_env(("u",), u[:, None])
    pts = np.zeros((len(u), mapdef.source.n))
    tan = np.zeros_like(pts)
    for i, e in enumerate(exprs):
        r = eval_dual(e, env)
        pts[:, i] = r.value
        tan[:, i] = r.deriv[..., 0]

    inside = mapdef.source.contains(pts)
    if not np.all(inside):
        i = int(np.flatnonzero(~inside)[0])
        raise ValueError(f"curve leaves the source domain at u = {u[i]}")
    G = mapdef.source.metric_at(pts)
    fut = mapdef.source.orientation_at(pts)
    E = frames(G, fut)
    classes = classify(G, E, fut, tan)
    for i, c in enumerate(classes):
        if c is not CausalClass.FUTURE_TIMELIKE:
            raise ValueError(
                f"curve tangent must be future timelike; classifies {c.value} at u = {u[i]}"
            )

    img, J = mapdef.image_and_jacobian(pts)
    if not np.all(mapdef.target.contains(img)):
        i = int(np.flatnonzero(~np.atleast_1d(mapdef.target.contains(img)))[0])
        raise ValueError(f"curve image leaves the target domain at u = {u[i]}")
    Gt = mapdef.target.metric_at(img)
    futW = mapdef.target.orientation_at(img)
    Ew = frames(Gt, futW)
    pushed = np.einsum("nai,ni->na", J, tan)
    out = classify(Gt, Ew, futW, pushed)
    return all(c is CausalClass.FUTURE_TIMELIKE for c in out)
