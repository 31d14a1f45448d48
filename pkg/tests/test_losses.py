import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegsr import tensor as tz
from eegsr.errors import ShapeError, UndefinedMetricError
from eegsr.losses import (
    auto_weighted_loss,
    freq_mse,
    mae_loss,
    masked_metrics,
    nmse,
    pcc,
    snr_db,
)
from eegsr.tensor import Tape, Tensor, grad_check, param

from helpers import naive_dft

RNG = np.random.default_rng(314)


class TestFreqMse:
    def test_identical_inputs_zero(self):
        x = Tensor(RNG.normal(size=(3, 8)))
        assert freq_mse(x, x).item() == 0.0

    def test_parseval_identity(self):
        gt = RNG.normal(size=(2, 16))
        sr = RNG.normal(size=(2, 16))
        got = freq_mse(Tensor(gt), Tensor(sr)).item()
        expected = 16 * ((gt - sr) ** 2).sum()
        assert abs(got - expected) / expected < 1e-9

    def test_against_naive_full_dft_oracle(self):
        gt = RNG.normal(size=(2, 8))
        sr = RNG.normal(size=(2, 8))
        expected = 0.0
        for m in range(2):
            expected += (np.abs(naive_dft(gt[m]) - naive_dft(sr[m])) ** 2).sum()
        got = freq_mse(Tensor(gt), Tensor(sr)).item()
        assert abs(got - expected) / expected < 1e-9

    def test_batched_matches_flat(self):
        gt = RNG.normal(size=(2, 3, 8))
        sr = RNG.normal(size=(2, 3, 8))
        got = freq_mse(Tensor(gt), Tensor(sr)).item()
        flat = freq_mse(Tensor(gt.reshape(6, 8)), Tensor(sr.reshape(6, 8))).item()
        assert abs(got - flat) < 1e-12

    def test_differentiable(self):
        gt = Tensor(RNG.normal(size=(2, 8)))
        sr = param(RNG.normal(size=(2, 8)))
        assert grad_check(lambda t: freq_mse(gt, t), sr) < 1e-5

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            freq_mse(Tensor(np.zeros((2, 8))), Tensor(np.zeros((2, 9))))


class TestMae:
    def test_identical_zero(self):
        x = Tensor(RNG.normal(size=(2, 5)))
        assert mae_loss(x, x).item() == 0.0

    def test_sign_flip_pair(self):
        got = mae_loss(Tensor([[1.0, -1.0]]), Tensor([[-1.0, 1.0]])).item()
        assert got == 4.0

    def test_against_loop_oracle(self):
        gt, sr = RNG.normal(size=(3, 7)), RNG.normal(size=(3, 7))
        expected = sum(abs(gt[i, j] - sr[i, j]) for i in range(3) for j in range(7))
        assert abs(mae_loss(Tensor(gt), Tensor(sr)).item() - expected) < 1e-12


class TestAutoWeighted:
    def test_unit_sigmas(self):
        total, bd = auto_weighted_loss(Tensor([3.0]), Tensor([5.0]), Tensor([0.0]), Tensor([0.0]))
        assert total.item() == pytest.approx(0.5 * 3 + 0.5 * 5)
        assert bd.sigma1_sq == 1.0 and bd.sigma2_sq == 1.0

    def test_breakdown_invariant(self):
        s1v, s2v = 0.7, -0.4
        total, bd = auto_weighted_loss(Tensor([2.0]), Tensor([3.0]), Tensor([s1v]), Tensor([s2v]))
        expected = 2.0 / (2 * math.exp(s1v)) + 3.0 / (2 * math.exp(s2v)) + 0.5 * (s1v + s2v)
        assert bd.total == pytest.approx(expected, rel=1e-12)
        assert bd.total == pytest.approx(total.item())

    def test_gradient_closed_form(self):
        fm, ma = 2.5, 1.5
        s1 = param([0.3])
        s2 = param([-0.2])
        with Tape() as tape:
            total, _ = auto_weighted_loss(Tensor([fm]), Tensor([ma]), s1, s2)
            tape.backward(total)
        expected_s1 = -fm / (2 * math.exp(0.3)) + 0.5
        expected_s2 = -ma / (2 * math.exp(-0.2)) + 0.5
        assert abs(s1.grad[0] - expected_s1) / abs(expected_s1) < 1e-8
        assert abs(s2.grad[0] - expected_s2) / abs(expected_s2) < 1e-8

    def test_gradient_matches_finite_differences(self):
        s1 = param([0.1])
        fn = lambda t: auto_weighted_loss(Tensor([2.0]), Tensor([1.0]), t, Tensor([0.0]))[0]
        assert grad_check(fn, s1) < 1e-8

    def test_optimal_s1_is_log_fmse(self):
        # first-order condition: d/ds1 [f/(2 e^s1) + s1/2] = 0  =>  s1 = ln f
        fm = 7.3
        s_grid = np.linspace(0, 4, 2001)
        totals = fm / (2 * np.exp(s_grid)) + 0.5 * s_grid
        assert abs(s_grid[np.argmin(totals)] - math.log(fm)) < 2e-3

    def test_gradients_flow_through_model_sigmas(self):
        s1, s2 = param([0.0]), param([0.0])
        fm = param([4.0])
        with Tape() as tape:
            total, _ = auto_weighted_loss(fm, Tensor([1.0]), s1, s2)
            tape.backward(total)
        assert s1.grad is not None and s2.grad is not None and fm.grad is not None


class TestMetrics:
    def test_exact_reconstruction(self):
        gt = RNG.normal(size=(3, 10))
        n, s, p = masked_metrics(gt, gt.copy())
        assert n == 0.0 and s == math.inf and p == pytest.approx(1.0)

    def test_zero_prediction(self):
        gt = RNG.normal(size=(3, 10))
        assert nmse(gt, np.zeros_like(gt)) == pytest.approx(1.0)
        assert snr_db(gt, np.zeros_like(gt)) == pytest.approx(0.0)

    def test_zero_energy_ground_truth(self):
        with pytest.raises(UndefinedMetricError):
            nmse(np.zeros((2, 4)), np.ones((2, 4)))

    def test_constant_row_pcc(self):
        with pytest.raises(UndefinedMetricError):
            pcc(np.ones((1, 5)), RNG.normal(size=(1, 5)))

    def test_snr_consistency(self):
        gt, sr = RNG.normal(size=(2, 50)), RNG.normal(size=(2, 50))
        assert snr_db(gt, sr) == pytest.approx(-10 * math.log10(nmse(gt, sr)))

    def test_paper_row_consistency(self):
        assert -10 * math.log10(0.188) == pytest.approx(7.258, abs=5e-4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
def test_pcc_affine_invariance(seed, gain, offset):
    rng = np.random.default_rng(seed)
    gt = rng.normal(size=(3, 12))
    sr = rng.normal(size=(3, 12))
    base = pcc(gt, sr)
    assert pcc(gt, gain * sr + offset) == pytest.approx(base, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 4), st.sampled_from([8, 12, 16, 32, 64]))
def test_parseval_property(seed, m, t_len):
    rng = np.random.default_rng(seed)
    gt = rng.normal(size=(m, t_len))
    sr = rng.normal(size=(m, t_len))
    got = freq_mse(Tensor(gt), Tensor(sr)).item()
    expected = t_len * ((gt - sr) ** 2).sum()
    assert abs(got - expected) / expected < 1e-9
