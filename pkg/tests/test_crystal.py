import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from traplab.crystal import DegenerateInputError, classify, histogram_csv, layer_count, nn_stats


def square_lattice(n=6, s=10e-6):
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.column_stack([i.ravel() * s, np.zeros(n * n), j.ravel() * s])


def test_chain():
    pos = np.column_stack([np.zeros(5), np.zeros(5), np.arange(5) * 8e-6])
    r = classify(pos)
    assert r.structure == "chain-1D"
    assert r.layer_count == 1
    assert r.plane_normal is None


def test_square_lattice_nn_exact():
    mean, mn, (counts, edges) = nn_stats(square_lattice(s=7e-6))
    assert mean == pytest.approx(7e-6, rel=1e-12)
    assert mn == pytest.approx(7e-6, rel=1e-12)
    assert len(counts) == 20 and edges[-1] == pytest.approx(3 * mean)


def test_two_ions():
    pos = [[0, 1e-4, 0], [3e-6, 1e-4, 4e-6]]
    mean, mn, _ = nn_stats(pos)
    assert mean == mn == pytest.approx(5e-6)


def test_planar_lattice_normal():
    r = classify(square_lattice())
    assert r.structure == "planar-2D"
    assert abs(r.plane_normal[1]) == pytest.approx(1.0)
    assert r.planarity_ratio < 1e-12


def test_bilayer():
    a = square_lattice(s=10e-6)
    b = a + [0, 20e-6, 0]
    pos = np.vstack([a, b])
    assert layer_count(pos, [0, 1, 0]) == 2
    r = classify(pos)
    assert r.structure == "volumetric-3D"


def test_dense_ball_counts_many_layers():
    rng = np.random.default_rng(0)
    # fcc-like packing in a ball: projections overlap without clear gaps
    g = np.arange(-6, 7)
    pts = np.array([(i, j, k) for i in g for j in g for k in g if (i + j + k) % 2 == 0], float)
    pts = pts[np.linalg.norm(pts, axis=1) < 6] * 7e-6 + rng.normal(scale=1e-7, size=(1, 3))
    r = classify(pts)
    assert r.structure == "volumetric-3D"
    assert r.layer_count > 3


def test_degenerate():
    with pytest.raises(DegenerateInputError):
        classify(np.zeros((4, 3)))
    with pytest.raises(DegenerateInputError):
        nn_stats([[0, 0, 0]])


def test_histogram_csv():
    text = histogram_csv(square_lattice())
    lines = text.strip().splitlines()
    assert lines[0] == "bin_low_um,bin_high_um,count"
    assert len(lines) == 21
    assert sum(int(l.split(",")[2]) for l in lines[1:]) == 36


@settings(max_examples=30, deadline=None)
@given(
    st.tuples(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi)),
    st.tuples(st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3)),
)
def test_rigid_motion_invariance(angles, shift):
    rng = np.random.default_rng(1)
    base = square_lattice(5) + rng.normal(scale=2e-7, size=(25, 3))
    rot = Rotation.from_euler("xyz", angles).as_matrix()
    moved = base @ rot.T + np.array(shift)
    r0, r1 = classify(base), classify(moved)
    assert r0.structure == r1.structure
    assert r0.layer_count == r1.layer_count
    assert abs(abs(np.dot(rot @ r0.plane_normal, r1.plane_normal)) - 1) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_scale_equivariance(s):
    pos = square_lattice(4) + np.random.default_rng(2).normal(scale=1e-6, size=(16, 3))
    m0 = nn_stats(pos)[0]
    m1 = nn_stats(pos * s)[0]
    assert m1 == pytest.approx(s * m0, rel=1e-12)
