import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dsbo.exceptions import (
    DimensionMismatch,
    DisconnectedGraph,
    DuplicateEdge,
    NotDoublyStochastic,
    SelfLoop,
)
from dsbo.topology import (
    MixingMatrix,
    build_complete,
    build_metropolis,
    build_ring,
    build_topology,
    mix,
    spectral_quantity,
)


def _circulant_rho(n):
    # eigenvalues of the 1/3-ring are 1/3 + (2/3) cos(2 pi k / n)
    lam = 1 / 3 + 2 / 3 * np.cos(2 * np.pi * np.arange(1, n) / n)
    return np.abs(lam).max()


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
def test_complete_uniform_and_rho_zero(n):
    W = build_complete(n)
    np.testing.assert_allclose(W.weights, np.full((n, n), 1 / n))
    assert W.rho == pytest.approx(0.0, abs=1e-12)


def test_ring_four_is_circulant():
    W = build_ring(4)
    np.testing.assert_allclose(W.weights[0], [1 / 3, 1 / 3, 0, 1 / 3])
    for k in range(4):
        np.testing.assert_allclose(W.weights[k], np.roll(W.weights[0], k))
    assert W.rho == pytest.approx(1 / 3, abs=1e-12)


def test_ring_three_equals_complete():
    np.testing.assert_allclose(build_ring(3).weights, build_complete(3).weights)
    assert build_ring(3).rho == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("n", [5, 8, 16])
def test_ring_rho_matches_circulant_eigenvalues(n):
    W = build_ring(n)
    assert 0 < W.rho < 1
    assert W.rho == pytest.approx(_circulant_rho(n), abs=1e-12)


def test_metropolis_examples():
    W = build_metropolis(2, [(0, 1)])
    np.testing.assert_allclose(W.weights, [[0.5, 0.5], [0.5, 0.5]])
    assert W.rho == pytest.approx(0, abs=1e-12)

    W = build_metropolis(3, [(0, 1), (1, 2)])
    expected = np.array([[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
    np.testing.assert_allclose(W.weights, expected)
    assert W.rho == pytest.approx(2 / 3, abs=1e-12)
    # oracle: eigenvalues of the path matrix are {1, 2/3, 0}
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(expected)), [0, 2 / 3, 1], atol=1e-12)


def test_metropolis_errors():
    with pytest.raises(DisconnectedGraph):
        build_metropolis(4, [(0, 1), (2, 3)])
    with pytest.raises(SelfLoop):
        build_metropolis(3, [(0, 0), (0, 1), (1, 2)])
    with pytest.raises(DuplicateEdge):
        build_metropolis(3, [(0, 1), (1, 0), (1, 2)])
    with pytest.raises(DimensionMismatch):
        build_metropolis(3, [(0, 1), (1, 3)])


def test_spectral_quantity_examples():
    assert spectral_quantity(np.eye(2)) == pytest.approx(1.0)
    assert spectral_quantity(np.full((5, 5), 0.2)) == pytest.approx(0.0, abs=1e-12)
    assert spectral_quantity(build_ring(4).weights) == pytest.approx(1 / 3)


def test_from_weights_rejects_non_stochastic():
    with pytest.raises(NotDoublyStochastic):
        MixingMatrix.from_weights(np.array([[0.6, 0.5], [0.4, 0.5]]))
    with pytest.raises(NotDoublyStochastic):
        MixingMatrix.from_weights(np.array([[1.5, -0.5], [-0.5, 1.5]]))


def test_weights_are_read_only():
    W = build_ring(5)
    with pytest.raises(ValueError):
        W.weights[0, 0] = 1.0


def test_build_topology_dispatch():
    assert build_topology({"kind": "ring", "n": 6}).kind == "ring"
    assert build_topology({"kind": "complete", "n": 6}).rho == pytest.approx(0, abs=1e-12)
    W = build_topology({"kind": "edges", "n": 3, "edges": [[0, 1], [1, 2]]})
    assert W.rho == pytest.approx(2 / 3)


def test_mix_fixed_points_and_averaging(rng):
    W = build_ring(6)
    col = rng.standard_normal((4, 1))
    same = np.repeat(col, 6, axis=1)
    np.testing.assert_allclose(mix(same, W), same, atol=1e-14)
    A = rng.standard_normal((4, 6))
    out = mix(A, build_complete(6))
    np.testing.assert_allclose(out, np.repeat(A.mean(axis=1, keepdims=True), 6, axis=1), atol=1e-14)


def test_mix_shape_error():
    with pytest.raises(DimensionMismatch):
        mix(np.zeros((3, 5)), build_ring(4))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 8), elements=st.floats(-1e3, 1e3)), st.sampled_from([3, 4, 8]))
def test_mix_preserves_mean_and_contracts(block, _):
    W = build_ring(8)
    mean = block.mean(axis=1, keepdims=True)
    out = mix(block, W)
    np.testing.assert_allclose(out.mean(axis=1), block.mean(axis=1), atol=1e-12 * max(1, np.abs(block).max()))
    assert np.linalg.norm(out - mean) <= W.rho * np.linalg.norm(block - mean) + 1e-10 * max(1, np.abs(block).max())


@pytest.mark.parametrize("W", [build_ring(8), build_complete(5), build_metropolis(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])])
def test_constructed_matrices_satisfy_invariants(W):
    w = W.weights
    np.testing.assert_allclose(w, w.T, atol=1e-15)
    np.testing.assert_allclose(w.sum(axis=0), 1, atol=1e-12)
    np.testing.assert_allclose(w.sum(axis=1), 1, atol=1e-12)
    assert w.min() >= 0
    assert W.rho < 1
