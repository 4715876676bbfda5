"""Backprop checks against finite differences.

Central differences at step h are only trustworthy where no ReLU unit sits
within h of its kink, so every model/batch draw is screened with
relu_kink_clearance before comparison.  See oracles.py for the bound.
"""

import numpy as np
import pytest

from cogload.nncore import SampleBatch, init_params
from cogload.nncore.network import loss_and_gradients, model_forward, cross_entropy

from oracles import (
    central_diff_gradients,
    central_diff_gradients_fast,
    flatten_params,
    max_relative_error,
    relu_kink_clearance,
    stacked_losses,
)


def screened_draw(start, channels_range=(2, 5), time_range=(6, 11), batch=2,
                  min_clearance=2.0):
    """First (batch, params) pair at draw index >= start that clears the
    ReLU kink screen. Returns (batch, params, draw_index)."""
    draw = start
    while True:
        r = np.random.default_rng(1000 + draw)
        ic = int(r.integers(*channels_range))
        tt = int(r.integers(*time_range))
        x = r.normal(size=(batch, ic, tt))
        y = r.integers(0, 3, size=batch)
        b = SampleBatch(x, y)
        params = init_params(ic, seed=draw)
        if relu_kink_clearance(b, params) > min_clearance:
            return b, params, draw
        draw += 1


class TestScalarOracle:
    def test_analytic_matches_central_differences(self):
        batch, params, _ = screened_draw(0)
        _, grads = loss_and_gradients(batch, params)
        fd = central_diff_gradients(batch, params)
        fd_arrays = dict(fd.named_arrays())
        for name, arr in grads.named_arrays():
            err = max_relative_error(fd_arrays[name], arr)
            assert err <= 1e-4, f"{name}: {err:.3e}"

    def test_error_shrinks_with_step(self):
        # second-order truncation: error should drop sharply from 1e-3 to 1e-5
        batch, params, _ = screened_draw(5)
        _, grads = loss_and_gradients(batch, params)
        flat = flatten_params(grads)
        coarse = flatten_params(central_diff_gradients(batch, params, step=1e-3))
        fine = flatten_params(central_diff_gradients(batch, params, step=1e-5))
        err_coarse = np.abs(coarse - flat).max()
        err_fine = np.abs(fine - flat).max()
        assert err_fine < err_coarse


class TestFastOracle:
    def test_fast_matches_scalar(self):
        batch, params, _ = screened_draw(10)
        slow = flatten_params(central_diff_gradients(batch, params))
        fast = central_diff_gradients_fast(batch, params)
        assert fast.shape == slow.shape
        assert np.allclose(slow, fast, rtol=0, atol=1e-9)

    def test_stacked_losses_match_production(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(3, 4, 9))
        y = rng.integers(0, 3, size=3)
        batch = SampleBatch(x, y)
        params = init_params(4, seed=11)
        theta = flatten_params(params)
        from cogload.nncore.network import loss_and_gradients as lag
        loss, _ = lag(batch, params)
        stacked = stacked_losses(x, y, np.stack([theta, theta]), params)
        assert np.allclose(stacked, loss, rtol=0, atol=1e-12)


class TestGradientInvariances:
    def test_duplication_halves_nothing(self):
        # mean loss: duplicating every sample leaves loss and gradient unchanged
        rng = np.random.default_rng(21)
        x = rng.normal(size=(3, 2, 8))
        y = rng.integers(0, 3, size=3)
        params = init_params(2, seed=4)
        loss1, g1 = loss_and_gradients(SampleBatch(x, y), params)
        x2 = np.concatenate([x, x], axis=0)
        y2 = np.concatenate([y, y])
        loss2, g2 = loss_and_gradients(SampleBatch(x2, y2), params)
        assert np.isclose(loss1, loss2, rtol=0, atol=1e-12)
        for (name, a), (_, b) in zip(g1.named_arrays(), g2.named_arrays()):
            assert np.allclose(a, b, rtol=0, atol=1e-12), name

    def test_gradient_zero_at_perfect_confidence_direction(self):
        # pushing logits toward the label must reduce the loss
        rng = np.random.default_rng(22)
        x = rng.normal(size=(2, 2, 8))
        y = rng.integers(0, 3, size=2)
        batch = SampleBatch(x, y)
        params = init_params(2, seed=5)
        loss, grads = loss_and_gradients(batch, params)
        step = params.copy()
        for (_, arr), (_, g) in zip(step.named_arrays(), grads.named_arrays()):
            arr -= 1e-4 * g
        loss_after, _ = loss_and_gradients(batch, step)
        assert loss_after < loss
