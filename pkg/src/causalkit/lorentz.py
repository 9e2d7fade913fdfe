"""Pointwise Lorentzian linear algebra.

Metrics use signature (+, -, ..., -): causal vectors have nonnegative
squared norm and the single positive eigenvalue direction is timelike.
A declared future-pointing causal vector fixes the time orientation at
each point; every classification here is relative to that choice.

Frame construction and classification accept stacked inputs (leading
batch axis) so region-sized workloads avoid per-point Python overhead.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

TOL_NULL = 1e-9
FRAME_TOL = 1e-10
_ZERO_NORM_SQ = 1e-26
_DIV_FLOOR = 1e-13


class AsymmetricError(ValueError):
    pass


class SignatureError(ValueError):
    def __init__(self, n_pos, n_neg, n_zero):
        super().__init__(
            f"expected Lorentzian signature (1 positive, rest negative); "
            f"got {n_pos} positive, {n_neg} negative, {n_zero} near-zero eigenvalues"
        )
        self.n_pos = n_pos
        self.n_neg = n_neg
        self.n_zero = n_zero


class DegenerateMetricError(ArithmeticError):
    pass


class CausalClass(enum.Enum):
    FUTURE_TIMELIKE = "FutureTimelike"
    PAST_TIMELIKE = "PastTimelike"
    FUTURE_NULL = "FutureNull"
    PAST_NULL = "PastNull"
    SPACELIKE = "Spacelike"
    ZERO = "Zero"

    @property
    def is_future(self):
        return self in (CausalClass.FUTURE_TIMELIKE, CausalClass.FUTURE_NULL)

    @property
    def is_causal(self):
        return self not in (CausalClass.SPACELIKE, CausalClass.ZERO)


@dataclass(frozen=True)
class MetricValue:
    dim: int
    matrix: np.ndarray


def validate_metric(matrix, sym_tol=1e-12, zero_tol=1e-12):
    """Check symmetry and Lorentzian signature; returns a MetricValue.

    Near-zero eigenvalues (relative to the spectral radius) are counted
    separately so a degenerate matrix is reported as such instead of
    being forced into one sign bucket.
    """
    G = np.asarray(matrix, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"metric must be square, got shape {G.shape}")
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(G - G.T)) > sym_tol * scale:
        raise AsymmetricError(f"metric asymmetric beyond {sym_tol} (relative)")
    w = np.linalg.eigvalsh(0.5 * (G + G.T))
    cut = zero_tol * max(1.0, float(np.max(np.abs(w))))
    n_zero = int(np.sum(np.abs(w) <= cut))
    n_pos = int(np.sum(w > cut))
    n_neg = int(np.sum(w < -cut))
    if n_pos != 1 or n_zero != 0 or n_neg != G.shape[0] - 1:
        raise SignatureError(n_pos, n_neg, n_zero)
    return MetricValue(G.shape[0], G)


@dataclass(frozen=True)
class OrientedPoint:
    """A point's coordinates, metric value and declared future direction."""

    coords: np.ndarray
    metric: MetricValue
    future: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "future", np.asarray(self.future, dtype=float))
        f = self.future
        G = self.metric.matrix
        nf = float(f @ f)
        if nf == 0.0:
            raise ValueError("future vector must be nonzero")
        q = float(f @ G @ f)
        scale = max(1.0, float(np.max(np.abs(G)))) * nf
        if q < -TOL_NULL * scale:
            raise ValueError(f"declared future vector is spacelike (g(f,f) = {q})")


def frames(G, future, tol=FRAME_TOL):
    """Orthonormal frames E with E^T G E = diag(1, -1, ..., -1), batched.

    G has shape (..., n, n) and future (..., n); the result matches.
    Column 0 is the normalized future seed: the declared future vector
    when timelike, otherwise that vector pushed into the cone along the
    metric's timelike eigendirection.  The spatial columns come from the
    eigenvectors of the projected negative metric, so they are an
    orthonormal completion determined by the metric alone.
    """
    G = np.asarray(G, dtype=float)
    f = np.asarray(future, dtype=float)
    squeeze = G.ndim == 2
    if squeeze:
        G = G[None]
        f = f[None]
    n = G.shape[-1]
    scale = np.maximum(1.0, np.abs(G).max(axis=(-2, -1))) * np.einsum("bi,bi->b", f, f)
    q = np.einsum("bi,bij,bj->b", f, G, f)

    seed = f.copy()
    weak = q <= TOL_NULL * scale
    if np.any(weak):
        # push a non-timelike declared future into the cone along the
        # timelike eigendirection, oriented to the same half
        wvals, wvecs = np.linalg.eigh(G[weak])
        u = wvecs[..., -1]
        s = np.einsum("bi,bij,bj->b", u, G[weak], f[weak])
        sign = np.where(s >= 0.0, 1.0, -1.0)
        fn = f[weak] / np.linalg.norm(f[weak], axis=-1, keepdims=True)
        seed[weak] = fn + sign[:, None] * u
        q = np.einsum("bi,bij,bj->b", seed, G, seed)

    root = np.sqrt(np.maximum(q, 0.0))
    if np.any(root < _DIV_FLOOR):
        raise DegenerateMetricError("timelike normalization below 1e-13")
    e0 = seed / root[:, None]

    # project g-orthogonally to e0, then diagonalize the negative metric
    Ge0 = np.einsum("bij,bj->bi", G, e0)
    P = np.eye(n)[None] - e0[:, :, None] * Ge0[:, None, :]
    H = -np.einsum("bki,bkl,blj->bij", P, G, P)
    hv, hw = np.linalg.eigh(H)
    spatial = np.einsum("bij,bjk->bik", P, hw[..., 1:])
    lam = hv[..., 1:]
    if np.any(lam < _DIV_FLOOR**2):
        raise DegenerateMetricError("spatial normalization below 1e-13")
    spatial = spatial / np.sqrt(lam)[:, None, :]
    # deterministic signs: largest-magnitude component positive
    idx = np.argmax(np.abs(spatial), axis=1)
    picked = np.take_along_axis(spatial, idx[:, None, :], axis=1)[:, 0, :]
    spatial = spatial * np.where(picked >= 0.0, 1.0, -1.0)[:, None, :]

    E = np.concatenate([e0[:, :, None], spatial], axis=2)
    eta = np.diag([1.0] + [-1.0] * (n - 1))
    err = np.abs(np.einsum("bki,bkl,blj->bij", E, G, E) - eta).max(axis=(-2, -1))
    if np.any(err > tol):
        raise DegenerateMetricError(f"frame orthonormality error {float(err.max()):.3e}")
    return E[0] if squeeze else E


def orthonormal_frame(point, tol=FRAME_TOL):
    """Frame columns at one oriented point; E^T G E = eta to `tol`."""
    return frames(point.metric.matrix, point.future, tol=tol)


def classify(G, E, future, v, tol_null=TOL_NULL):
    """Causal classes of vectors v against metric G and frame E, batched.

    All arguments broadcast over a leading batch axis; returns a list of
    CausalClass (or a single one for unbatched input).
    """
    G = np.asarray(G, dtype=float)
    squeeze = G.ndim == 2
    if squeeze:
        G = G[None]
        E = np.asarray(E, dtype=float)[None]
        future = np.asarray(future, dtype=float)[None]
        v = np.asarray(v, dtype=float)[None]
    vhat = np.linalg.solve(E, v[..., None])[..., 0]
    sigma = np.einsum("bi,bi->b", vhat, vhat)
    q = np.einsum("bi,bij,bj->b", v, G, v)
    s = np.einsum("bi,bij,bj->b", v, G, future)
    # when g(v, future) degenerates (null future parallel to v), the frame
    # time component still carries the orientation because e0 is future
    fscale = np.sqrt(np.einsum("bi,bi->b", future, future) * np.einsum("bi,bi->b", v, v))
    fscale = fscale * np.abs(G).max(axis=(-2, -1))
    s = np.where(np.abs(s) <= 1e-13 * np.maximum(fscale, 1e-300), vhat[..., 0], s)

    out = []
    for i in range(len(q)):
        if sigma[i] < _ZERO_NORM_SQ:
            out.append(CausalClass.ZERO)
        elif abs(q[i]) <= tol_null * sigma[i]:
            out.append(CausalClass.FUTURE_NULL if s[i] > 0 else CausalClass.PAST_NULL)
        elif q[i] > tol_null * sigma[i]:
            out.append(CausalClass.FUTURE_TIMELIKE if s[i] > 0 else CausalClass.PAST_TIMELIKE)
        else:
            out.append(CausalClass.SPACELIKE)
    return out[0] if squeeze else out


def causal_character(point, v, tol_null=TOL_NULL, frame=None):
    """Causal class of a single coordinate-component vector at a point."""
    E = orthonormal_frame(point) if frame is None else frame
    return classify(point.metric.matrix, E, point.future, np.asarray(v, dtype=float), tol_null)


def raise_index(point, w):
    """Vector components of a covector: solve G v = w."""
    return np.linalg.solve(point.metric.matrix, np.asarray(w, dtype=float))
