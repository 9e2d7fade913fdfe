import numpy as np
import pytest

from causalkit.lorentz import (
    AsymmetricError, CausalClass, DegenerateMetricError, MetricValue,
    OrientedPoint, SignatureError, causal_character, classify, frames,
    orthonormal_frame, raise_index, validate_metric,
)

ETA = np.diag([1.0, -1.0, -1.0, -1.0])


def _point(G, future):
    return OrientedPoint(np.zeros(len(future)), MetricValue(len(future), np.asarray(G, float)), future)


def test_validate_minkowski():
    mv = validate_metric(ETA)
    assert mv.dim == 4


def test_validate_rejects_asymmetric():
    with pytest.raises(AsymmetricError):
        validate_metric([[1.0, 0.1], [0.0, -1.0]])


def test_validate_signature_counts():
    with pytest.raises(SignatureError) as err:
        validate_metric(np.diag([1.0, 1.0, -1.0, -1.0]))
    assert (err.value.n_pos, err.value.n_neg) == (2, 2)
    with pytest.raises(SignatureError) as err:
        validate_metric(np.diag([1.0, -1.0, 0.0, -1.0]))
    assert err.value.n_zero == 1


def test_validate_radiating_block_against_quadratic_formula():
    # [[F, -1], [-1, 0]] has eigenvalues (F +- sqrt(F^2 + 4))/2: one each sign
    for F in (-3.0, -0.5, 0.0, 0.5, 0.97):
        block = np.array([[F, -1.0], [-1.0, 0.0]])
        w = np.sort(np.linalg.eigvalsh(block))
        lo = (F - np.sqrt(F * F + 4.0)) / 2.0
        hi = (F + np.sqrt(F * F + 4.0)) / 2.0
        assert w[0] == pytest.approx(lo, abs=1e-14)
        assert w[1] == pytest.approx(hi, abs=1e-14)
        validate_metric(block)


def test_oriented_point_validation():
    _point(ETA, [1.0, 0.0, 0.0, 0.0])
    _point(ETA, [1.0, 1.0, 0.0, 0.0])  # null declared future is allowed
    with pytest.raises(ValueError):
        _point(ETA, [0.0, 1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        _point(ETA, [0.0, 0.0, 0.0, 0.0])


def test_frame_minkowski_is_identity():
    E = orthonormal_frame(_point(ETA, [1.0, 0.0, 0.0, 0.0]))
    assert np.allclose(E, np.eye(4), atol=1e-14)


def test_frame_property_random_metrics():
    rng = np.random.default_rng(3)
    for _ in range(200):
        A = rng.normal(size=(4, 4)) + np.eye(4)
        while abs(np.linalg.det(A)) < 0.1:
            A = rng.normal(size=(4, 4)) + np.eye(4)
        G = A.T @ ETA @ A
        # a future direction: preimage of a timelike vector
        v = np.linalg.solve(A, np.array([1.0, 0.2, -0.1, 0.3]))
        p = _point(G, v)
        E = orthonormal_frame(p)
        assert np.max(np.abs(E.T @ G @ E - ETA)) < 1e-10
        assert v @ G @ E[:, 0] > 0.0


def test_frame_desitter_scales_angular_directions():
    chi, theta = 1.0, 0.7
    G = np.diag([1.0, -1.0, -np.sin(chi) ** 2, -(np.sin(chi) * np.sin(theta)) ** 2])
    E = orthonormal_frame(_point(G, [1.0, 0.0, 0.0, 0.0]))
    cols = [E[:, j] for j in range(4)]
    assert np.allclose(cols[0], [1, 0, 0, 0], atol=1e-14)
    wanted = np.array([0.0, 0.0, 1.0 / np.sin(chi), 0.0])
    assert any(np.allclose(c, wanted, atol=1e-12) or np.allclose(c, -wanted, atol=1e-12) for c in cols)


def test_frame_with_near_null_future():
    # radiating interior block with eps-blended future, like the catalog uses
    F = 0.4
    G = np.array([
        [F, -1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -4.0, 0.0],
        [0.0, 0.0, 0.0, -4.0],
    ])
    f = np.array([1e-3, -1.0, 0.0, 0.0])
    p = _point(G, f)
    E = orthonormal_frame(p)
    assert np.max(np.abs(E.T @ G @ E - ETA)) < 1e-10
    assert f @ G @ E[:, 0] > 0.0


def test_frame_degenerate_raises():
    G = np.array([[1.0, 0.0], [0.0, -1.0]])
    p1 = _point(G, [1.0, 0.0])
    E = orthonormal_frame(p1)
    assert np.allclose(E, np.eye(2))
    with pytest.raises(DegenerateMetricError):
        frames(np.array([[1e-30, 0.0], [0.0, -1e-30]]), np.array([1.0, 0.0]))


def test_causal_character_minkowski():
    p = _point(ETA, [1.0, 0.0, 0.0, 0.0])
    assert causal_character(p, [1.0, 0.0, 0.0, 0.0]) is CausalClass.FUTURE_TIMELIKE
    assert causal_character(p, [1.0, 1.0, 0.0, 0.0]) is CausalClass.FUTURE_NULL
    assert causal_character(p, [-2.0, 1.0, 0.0, 0.0]) is CausalClass.PAST_TIMELIKE
    assert causal_character(p, [-1.0, -1.0, 0.0, 0.0]) is CausalClass.PAST_NULL
    assert causal_character(p, [0.0, 1.0, 0.0, 0.0]) is CausalClass.SPACELIKE
    assert causal_character(p, [0.0, 0.0, 0.0, 0.0]) is CausalClass.ZERO
    assert causal_character(p, 1e-14 * np.array([1.0, 0.0, 0.0, 0.0])) is CausalClass.ZERO
    assert causal_character(p, 1e-12 * np.array([1.0, 0.0, 0.0, 0.0])) is CausalClass.FUTURE_TIMELIKE


def test_causal_character_tolerance_scales_with_vector():
    p = _point(ETA, [1.0, 0.0, 0.0, 0.0])
    # near-null vector: q/sigma decides, so scaling the vector changes nothing
    v = np.array([1.0, 1.0 + 1e-12, 0.0, 0.0])
    for s in (1.0, 1e-8, 1e6):
        assert causal_character(p, s * v) is CausalClass.FUTURE_NULL


def test_causal_character_desitter_null():
    tbar, alpha = 0.8, 1.0
    w = alpha * np.cosh(tbar / alpha)
    G = np.diag([1.0, -w * w, -w * w, -w * w])
    p = _point(G, [1.0, 0.0, 0.0, 0.0])
    assert causal_character(p, [1.0, 1.0 / w, 0.0, 0.0]) is CausalClass.FUTURE_NULL


def test_causal_character_null_future_field():
    # declared future is itself null: the frame time component breaks the tie
    p = _point(ETA, [1.0, 1.0, 0.0, 0.0])
    assert causal_character(p, [1.0, 1.0, 0.0, 0.0]) is CausalClass.FUTURE_NULL
    assert causal_character(p, [-1.0, -1.0, 0.0, 0.0]) is CausalClass.PAST_NULL


def test_raise_index_radiating_dt():
    F = 0.3
    G = np.array([
        [F, -1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
    ])
    p = _point(G, [1e-3, -1.0, 0.0, 0.0])
    v = raise_index(p, [1.0, 0.0, 0.0, 0.0])
    assert np.allclose(v, [0.0, -1.0, 0.0, 0.0], atol=1e-14)


def test_classify_batched_matches_scalar():
    rng = np.random.default_rng(9)
    G = np.broadcast_to(ETA, (32, 4, 4)).copy()
    fut = np.broadcast_to(np.array([1.0, 0, 0, 0]), (32, 4)).copy()
    E = frames(G, fut)
    V = rng.normal(size=(32, 4))
    got = classify(G, E, fut, V)
    p = _point(ETA, [1.0, 0.0, 0.0, 0.0])
    for i in range(32):
        assert got[i] is causal_character(p, V[i])
