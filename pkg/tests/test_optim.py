"""Optimizer update rules, gradient clipping, and learning-rate schedules."""
import math

import numpy as np
import pytest

from intentlab.errors import ConfigError, NumericError
from intentlab.numerics import (
    Adam,
    AdamW,
    CosineAnnealing,
    PlateauHalving,
    Tensor,
    clip_gradients,
    global_grad_norm,
)


def scalar_param(value=1.0):
    return Tensor(np.array([value], dtype=np.float32), requires_grad=True)


def test_adam_first_step_hand_evaluated():
    # with g=1 at step 1, bias-corrected m_hat = v_hat = 1 so the update is
    # lr * 1 / (1 + eps) which is lr up to 1e-8
    p = scalar_param(1.0)
    opt = Adam({"p": p}, lr=1e-3)
    p.grad = np.array([1.0], dtype=np.float32)
    opt.step()
    assert abs((1.0 - p.data[0]) - 1e-3) < 1e-7
    assert opt.step_count == 1


def test_adam_zero_gradient_keeps_parameter():
    p = scalar_param(2.5)
    opt = Adam({"p": p}, lr=1e-2)
    p.grad = np.zeros(1, dtype=np.float32)
    opt.step()
    assert p.data[0] == 2.5


def test_adam_folds_decay_into_gradient():
    # L2-coupled decay: with zero gradient the effective gradient is wd*p,
    # so the parameter still moves and the moments change
    p = scalar_param(4.0)
    opt = Adam({"p": p}, lr=1e-3, weight_decay=0.1)
    p.grad = np.zeros(1, dtype=np.float32)
    opt.step()
    assert p.data[0] < 4.0
    assert opt._m["p"][0] != 0.0


def test_adamw_decoupled_decay_closed_form():
    # zero gradient: moments stay zero, decay multiplies by (1 - lr*wd) each step
    p = scalar_param(5.0)
    lr, wd = 1e-2, 0.3
    opt = AdamW({"p": p}, lr=lr, weight_decay=wd)
    for _ in range(7):
        p.grad = np.zeros(1, dtype=np.float32)
        opt.step()
    want = 5.0 * (1.0 - lr * wd) ** 7
    assert abs(p.data[0] - want) < 1e-6
    assert np.all(opt._m["p"] == 0.0)


def test_nan_gradient_refuses_step():
    p = scalar_param(1.0)
    opt = Adam({"p": p}, lr=1e-3)
    p.grad = np.array([np.nan], dtype=np.float32)
    with pytest.raises(NumericError) as exc:
        opt.step()
    assert "p" in str(exc.value)
    # nothing moved: parameter, counter, and moments are untouched
    assert p.data[0] == 1.0
    assert opt.step_count == 0
    assert np.all(opt._m["p"] == 0.0)


def test_step_counter_strictly_increases():
    p = scalar_param(0.0)
    opt = Adam({"p": p}, lr=1e-3)
    for want in (1, 2, 3):
        p.grad = np.array([0.5], dtype=np.float32)
        opt.step()
        assert opt.step_count == want


def test_moments_match_parameter_shape():
    p = Tensor(np.zeros((3, 4), dtype=np.float32), requires_grad=True)
    opt = Adam({"w": p})
    assert opt._m["w"].shape == (3, 4)
    assert opt._v["w"].shape == (3, 4)


def test_bad_lr_rejected():
    with pytest.raises(ConfigError):
        Adam({"p": scalar_param()}, lr=0.0)


def test_clip_below_threshold_unchanged():
    g = [np.array([0.3, 0.4], dtype=np.float32)]
    before = g[0].copy()
    clip_gradients(g, max_norm=1.0)
    assert np.array_equal(g[0], before)


def test_clip_hand_case():
    g = [np.array([3.0, 4.0], dtype=np.float32)]
    pre = clip_gradients(g, max_norm=1.0)
    assert abs(pre - 5.0) < 1e-6
    assert np.allclose(g[0], [0.6, 0.8], atol=1e-6)


def test_clip_preserves_direction_and_caps_norm():
    rng = np.random.default_rng(2)
    grads = [rng.normal(size=s).astype(np.float32) * 3 for s in [(4, 4), (7,), (2, 3)]]
    flat_before = np.concatenate([g.ravel().copy() for g in grads])
    clip_gradients(grads, max_norm=1.0)
    flat_after = np.concatenate([g.ravel() for g in grads])
    cos = flat_before @ flat_after / (
        np.linalg.norm(flat_before) * np.linalg.norm(flat_after)
    )
    assert abs(cos - 1.0) < 1e-6
    assert global_grad_norm(grads) <= 1.0 + 1e-6


def test_clip_never_increases_norm():
    g = [np.array([0.1], dtype=np.float32)]
    before = global_grad_norm(g)
    clip_gradients(g, max_norm=1.0)
    assert global_grad_norm(g) <= before


def test_plateau_rule_trace():
    # losses [1.0, 0.9, 0.95, 0.96, 0.97]: best hits 0.9 at epoch 2, then three
    # stale epochs in a row trigger the halving after epoch 5
    sched = PlateauHalving(base_lr=1.0, patience=3)
    rates = [sched.update(v) for v in (1.0, 0.9, 0.95, 0.96, 0.97)]
    assert rates == [1.0, 1.0, 1.0, 1.0, 0.5]


def test_plateau_any_decrease_resets_patience():
    sched = PlateauHalving(base_lr=1.0, patience=3)
    # strictly interpreted: an improvement of any size resets the counter
    for v in (1.0, 0.99, 0.98, 0.97, 0.96, 0.95):
        rate = sched.update(v)
    assert rate == 1.0


def test_plateau_rate_is_base_times_power_of_two():
    sched = PlateauHalving(base_lr=0.8, patience=1)
    sched.update(1.0)
    for _ in range(3):
        sched.update(2.0)  # never improves
    assert sched.rate == 0.8 * 2.0 ** -3


def test_cosine_endpoints_and_midpoint():
    sched = CosineAnnealing(base_lr=0.4, total_epochs=10)
    assert abs(sched.rate_at(0) - 0.4) < 1e-12
    assert abs(sched.rate_at(5) - 0.2) < 1e-12
    assert abs(sched.rate_at(10)) < 1e-9


def test_cosine_monotone_within_cycle():
    sched = CosineAnnealing(base_lr=1.0, total_epochs=30)
    rates = [sched.rate_at(t) for t in range(31)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_cosine_matches_formula():
    sched = CosineAnnealing(base_lr=0.1, total_epochs=7)
    for t in range(8):
        want = 0.1 * 0.5 * (1 + math.cos(math.pi * t / 7))
        assert abs(sched.rate_at(t) - want) < 1e-12
