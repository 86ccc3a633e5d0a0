import numpy as np
import pytest

from hetproof.curve import CircleProblem
from hetproof.errors import NoSeedFound
from hetproof.runner import find_seeds, load_config
from hetproof.seeds import correct, loop_seeds, null_vector, resample, sample_zeros


@pytest.fixture(scope="module")
def circle_chain():
    cfg = load_config(None, "toy-circle")
    return find_seeds(cfg, CircleProblem())


def test_circle_seeds_on_zero_set(circle_chain):
    pts = circle_chain.points
    assert circle_chain.closed
    assert np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 1.0).max() < 1e-12
    assert circle_chain.residual < 1e-12


def test_circle_seed_count_and_length(circle_chain):
    assert len(circle_chain.points) == 64
    assert circle_chain.length == pytest.approx(2 * np.pi, rel=1e-3)


def test_circle_spacing_is_uniform(circle_chain):
    sp = circle_chain.spacing
    assert sp["max"] < 1.05 * sp["min"]


def test_circle_seeds_wrap_once(circle_chain):
    ang = np.unwrap(np.arctan2(circle_chain.points[:, 1], circle_chain.points[:, 0]))
    assert abs(abs(ang[-1] - ang[0]) - 2 * np.pi * 63 / 64) < 0.05


def test_sample_zeros_residual():
    Z = sample_zeros(CircleProblem(), n=200, box=1.5, seed=1)
    assert len(Z) > 0 and np.abs(np.hypot(Z[:, 0], Z[:, 1]) - 1).max() < 1e-12


def test_null_vector_is_tangent():
    q = np.array([[0.6, 0.8]])
    _, DF = CircleProblem().float_F(q)
    v = null_vector(DF)[0]
    assert abs(v @ q[0]) < 1e-14 and abs(np.linalg.norm(v) - 1) < 1e-14


def test_correct_returns_to_curve():
    q, ok = correct(CircleProblem(), np.array([1.01, 0.02]), np.array([0.0, 1.0]))
    assert ok and abs(np.hypot(*q) - 1) < 1e-13


def test_resample_open_keeps_ends():
    th = np.linspace(0, 1.0, 50)
    pts = np.stack([np.cos(th), np.sin(th)], 1)
    out, L = resample(CircleProblem(), pts, 10, closed=False)
    assert out.shape == (11, 2) and np.array_equal(out[0], pts[0]) and np.array_equal(out[-1], pts[-1])
    assert L == pytest.approx(1.0, rel=1e-3)


def test_no_candidates():
    with pytest.raises(NoSeedFound):
        loop_seeds(CircleProblem(), 16, np.zeros((0, 2)))
