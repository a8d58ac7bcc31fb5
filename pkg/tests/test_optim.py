import numpy as np
import pytest

from glory.binio import FormatError
from glory.numerics import NonFiniteGradientError, OptimizerState, Tensor, adam_step, lr_at
from glory.numerics.checkpoint import checkpoint_bytes, load_checkpoint, read_checkpoint, save_checkpoint


def test_schedule_endpoints():
    assert lr_at(0, 2e-4, 100) == 0.0
    assert lr_at(10, 2e-4, 100) == pytest.approx(2e-4)
    assert lr_at(5, 2e-4, 100) == pytest.approx(1e-4)
    assert lr_at(55, 2e-4, 100) == pytest.approx(1e-4)
    assert lr_at(100, 2e-4, 100) == 0.0
    assert lr_at(37, 2e-4, None) == 2e-4


def test_schedule_is_piecewise_monotone():
    rates = [lr_at(t, 1.0, 200) for t in range(201)]
    assert all(a <= b for a, b in zip(rates[:20], rates[1:21]))
    assert all(a >= b for a, b in zip(rates[20:], rates[21:]))


def test_first_step_moves_by_learning_rate():
    p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    state = OptimizerState(base_lr=0.01)
    adam_step(state, {"p": p}, {"p": np.array([0.5, -3.0, 1e-3])})
    np.testing.assert_allclose(p.values, [0.99, -1.99, 2.99], atol=1e-7)


def test_quadratic_bowl_decreases():
    target = np.array([3.0, -1.0])
    p = Tensor(np.zeros(2), requires_grad=True)
    state = OptimizerState(base_lr=0.1)
    losses = []
    for _ in range(5):
        losses.append(float(np.sum((p.values - target) ** 2)))
        adam_step(state, {"p": p}, {"p": 2 * (p.values - target)})
    losses.append(float(np.sum((p.values - target) ** 2)))
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_non_finite_gradient_names_parameter():
    p = Tensor(np.zeros(2), requires_grad=True)
    before = p.values.copy()
    with pytest.raises(NonFiniteGradientError, match="enc.W"):
        adam_step(OptimizerState(), {"enc.W": p}, {"enc.W": np.array([np.nan, 0.0])})
    assert np.array_equal(p.values, before)


def test_clip_norm_bounds_update_direction():
    p = Tensor(np.zeros(2), requires_grad=True)
    state = OptimizerState(base_lr=0.1)
    adam_step(state, {"p": p}, {"p": np.array([300.0, 400.0])}, clip_norm=1.0)
    np.testing.assert_allclose(state.m["p"], 0.1 * np.array([0.6, 0.8]))


def test_checkpoint_round_trip(tmp_path, rng):
    params = {"b": rng.normal(size=(3,)).astype(np.float32), "a": rng.normal(size=(2, 4)).astype(np.float32)}
    state = OptimizerState(base_lr=1e-3, total_steps=50, step=7)
    state.m = {k: np.full_like(v, 0.25) for k, v in params.items()}
    state.v = {k: np.full_like(v, 0.5) for k, v in params.items()}
    header = {"epoch": 3, "hp": {"K": 2}}
    path = tmp_path / "x.gckp"
    save_checkpoint(path, header, params, state)
    h2, p2, s2 = load_checkpoint(path)
    assert h2 == header
    assert list(p2) == ["a", "b"]
    for k in params:
        assert np.array_equal(p2[k], params[k])
        assert np.array_equal(s2.m[k], state.m[k])
    assert (s2.step, s2.total_steps, s2.base_lr) == (7, 50, 1e-3)
    assert checkpoint_bytes(h2, p2, s2) == path.read_bytes()


def test_checkpoint_rejects_bad_input():
    data = checkpoint_bytes({}, {"a": np.zeros(2)})
    with pytest.raises(FormatError):
        read_checkpoint(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        read_checkpoint(data + b"\0")
    with pytest.raises(FormatError):
        read_checkpoint(data[:-3])
