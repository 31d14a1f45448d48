import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegsr import tensor as tz
from eegsr.errors import NumericError, ShapeError
from eegsr.tensor import Tape, Tensor, grad_check, param

from helpers import loop_matmul, naive_dft

RNG = np.random.default_rng(20240817)


def scalar_of(t):
    return tz.sum_sq(t)


class TestMatmul:
    def test_identity(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = tz.matmul(Tensor(np.eye(2)), a)
        np.testing.assert_array_equal(out.values, a.values)

    def test_projector(self):
        p = Tensor([[1.0, 0.0], [0.0, 0.0]])
        b = Tensor([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_array_equal(tz.matmul(p, b).values, [[5.0, 6.0], [0.0, 0.0]])

    def test_against_loop_oracle(self):
        a = RNG.normal(size=(3, 4))
        b = RNG.normal(size=(4, 2))
        out = tz.matmul(Tensor(a), Tensor(b))
        np.testing.assert_allclose(out.values, loop_matmul(a, b), rtol=1e-12)

    def test_gradients_match_finite_differences(self):
        a = param(RNG.normal(size=(3, 4)))
        b = param(RNG.normal(size=(4, 2)))
        err = grad_check(lambda ts: scalar_of(tz.matmul(ts[0], ts[1])), [a, b])
        assert err < 1e-6

    def test_batched_against_per_sample(self):
        a = RNG.normal(size=(5, 3, 4))
        b = RNG.normal(size=(4, 2))
        out = tz.matmul(Tensor(a), Tensor(b)).values
        for i in range(5):
            np.testing.assert_allclose(out[i], a[i] @ b, rtol=1e-12)

    def test_shape_mismatch_reports_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            tz.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))


class TestSoftmax:
    def test_uniform_row(self):
        out = tz.softmax_rows(Tensor([[0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(out.values, [[1 / 3, 1 / 3, 1 / 3]])

    def test_large_values_no_overflow(self):
        out = tz.softmax_rows(Tensor([[1000.0, 0.0]]))
        assert np.isfinite(out.values).all()
        np.testing.assert_allclose(out.values[0, 0], 1.0, atol=1e-12)

    def test_rows_sum_to_one(self):
        out = tz.softmax_rows(Tensor(RNG.normal(size=(2, 5))))
        np.testing.assert_allclose(out.values.sum(axis=-1), 1.0, atol=1e-12)
        assert (out.values >= 0).all() and (out.values <= 1).all()


class TestLayerNorm:
    def test_constant_row_maps_to_zero(self):
        g, b = Tensor(np.ones(4)), Tensor(np.zeros(4))
        out = tz.layer_norm(Tensor([[3.0, 3.0, 3.0, 3.0]]), g, b)
        np.testing.assert_array_equal(out.values, np.zeros((1, 4)))

    def test_two_point_row(self):
        g, b = Tensor(np.ones(2)), Tensor(np.zeros(2))
        out = tz.layer_norm(Tensor([[1.0, 3.0]]), g, b)
        np.testing.assert_allclose(out.values, [[-1.0, 1.0]], atol=1e-3)

    def test_row_statistics(self):
        x = RNG.normal(size=(6, 9)) * 3 + 1
        out = tz.layer_norm(Tensor(x), Tensor(np.ones(9)), Tensor(np.zeros(9)))
        np.testing.assert_allclose(out.values.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.values.var(axis=-1), 1.0, atol=1e-3)

    def test_gradient(self):
        x = param(RNG.normal(size=(3, 5)))
        g = param(RNG.normal(size=5))
        b = param(RNG.normal(size=5))
        err = grad_check(lambda ts: scalar_of(tz.layer_norm(ts[0], ts[1], ts[2])), [x, g, b])
        assert err < 1e-4


class TestLinear:
    def test_identity_weight(self):
        x = RNG.normal(size=(3, 4))
        out = tz.linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.values, x)

    def test_zero_input_gives_bias(self):
        b = RNG.normal(size=5)
        out = tz.linear(Tensor(np.zeros((3, 2))), Tensor(np.zeros((2, 5))), Tensor(b))
        np.testing.assert_array_equal(out.values, np.tile(b, (3, 1)))

    def test_against_loop_oracle(self):
        x, w, b = RNG.normal(size=(3, 4)), RNG.normal(size=(4, 2)), RNG.normal(size=2)
        out = tz.linear(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.values, loop_matmul(x, w) + b, rtol=1e-12)


class TestGelu:
    def test_zero(self):
        assert tz.gelu(Tensor([0.0])).values[0] == 0.0

    def test_large_positive_asymptote(self):
        assert abs(tz.gelu(Tensor([10.0])).values[0] - 10.0) < 1e-6

    def test_gradient(self):
        x = param(RNG.normal(size=(4, 3)))
        err = grad_check(lambda t: tz.sum_sq(tz.gelu(t)), x)
        assert err < 1e-5


class TestShapeOps:
    def test_concat_rows(self):
        out = tz.concat(Tensor([[1.0]]), Tensor([[2.0]]), axis=0)
        np.testing.assert_array_equal(out.values, [[1.0], [2.0]])

    def test_transpose_involution(self):
        a = RNG.normal(size=(3, 5))
        out = tz.transpose2d(tz.transpose2d(Tensor(a)))
        np.testing.assert_array_equal(out.values, a)

    def test_concat_slice_round_trip(self):
        a, b = RNG.normal(size=(4, 6)), RNG.normal(size=(4, 6))
        joined = tz.concat(Tensor(a), Tensor(b), axis=1)
        back_a = tz.slice_axis(joined, 1, 0, 6)
        back_b = tz.slice_axis(joined, 1, 6, 12)
        np.testing.assert_array_equal(back_a.values, a)
        np.testing.assert_array_equal(back_b.values, b)

    def test_slice_out_of_bounds(self):
        with pytest.raises(ShapeError):
            tz.slice_axis(Tensor(np.zeros((2, 3))), 1, 0, 4)

    def test_take_merge_round_trip(self):
        full = RNG.normal(size=(5, 4))
        vis, mas = [0, 2, 4], [1, 3]
        v = tz.take_rows(Tensor(full), vis)
        m = tz.take_rows(Tensor(full), mas)
        merged = tz.merge_rows(v, m, vis, mas)
        np.testing.assert_array_equal(merged.values, full)

    def test_merge_rejects_overlap(self):
        with pytest.raises(ShapeError):
            tz.merge_rows(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))), [0, 1], [1, 2])

    def test_broadcast_gradient_sums(self):
        a = param(RNG.normal(size=(1, 4)))
        err = grad_check(lambda t: tz.sum_sq(tz.broadcast_to(t, (5, 3, 4))), a)
        assert err < 1e-6


class TestRdft:
    def test_dc(self):
        out = tz.rdft(Tensor([1.0, 1.0, 1.0, 1.0])).values
        np.testing.assert_allclose(out[0], [4.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(out[1:], 0.0, atol=1e-12)

    def test_pure_tone(self):
        out = tz.rdft(Tensor([1.0, 0.0, -1.0, 0.0])).values
        mags = np.hypot(out[:, 0], out[:, 1])
        assert mags[1] > 1.9 and mags[0] < 1e-12 and mags[2] < 1e-12

    def test_against_naive_dft(self):
        x = RNG.normal(size=16)
        out = tz.rdft(Tensor(x)).values
        ref = naive_dft(x)[:9]
        np.testing.assert_allclose(out[:, 0], ref.real, atol=1e-9)
        np.testing.assert_allclose(out[:, 1], ref.imag, atol=1e-9)

    def test_parseval_with_doubling(self):
        for t_len in (7, 8, 16, 33):
            x = RNG.normal(size=t_len)
            out = tz.rdft(Tensor(x)).values
            w = np.full(t_len // 2 + 1, 2.0)
            w[0] = 1.0
            if t_len % 2 == 0:
                w[-1] = 1.0
            lhs = (w * (out[:, 0] ** 2 + out[:, 1] ** 2)).sum()
            rhs = t_len * (x ** 2).sum()
            assert abs(lhs - rhs) / rhs < 1e-9

    def test_adjoint_gradient(self):
        x = param(RNG.normal(size=(3, 8)))
        err = grad_check(lambda t: tz.sum_sq(tz.rdft(t)), x)
        assert err < 1e-6


class TestDropout:
    def test_rate_zero_is_identity(self):
        x = Tensor(RNG.normal(size=(3, 3)))
        assert tz.dropout(x, 0.0, np.random.default_rng(0), training=True) is x

    def test_eval_mode_is_identity(self):
        x = Tensor(RNG.normal(size=(3, 3)))
        assert tz.dropout(x, 0.9, None, training=False) is x

    def test_keep_fraction(self):
        rng = np.random.default_rng(7)
        x = Tensor(np.ones((400, 250)))
        out = tz.dropout(x, 0.3, rng, training=True)
        kept = (out.values != 0).mean()
        assert abs(kept - 0.7) < 0.01

    def test_survivors_rescaled(self):
        rng = np.random.default_rng(7)
        out = tz.dropout(Tensor(np.ones((100, 100))), 0.5, rng, training=True)
        survivors = out.values[out.values != 0]
        np.testing.assert_allclose(survivors, 2.0)

    def test_rate_out_of_range(self):
        with pytest.raises(ValueError):
            tz.dropout(Tensor([1.0]), 1.0, None, training=True)


class TestCrossEntropy:
    def test_uniform_logits(self):
        out = tz.softmax_cross_entropy(Tensor(np.zeros((4, 3))), [0, 1, 2, 0])
        np.testing.assert_allclose(out.values[0], np.log(3.0), atol=1e-12)

    def test_gradient(self):
        logits = param(RNG.normal(size=(5, 4)))
        labels = np.array([0, 3, 1, 2, 2])
        err = grad_check(lambda t: tz.softmax_cross_entropy(t, labels), logits, h=1e-5)
        assert err < 1e-5


class TestTapeMechanics:
    def test_quadratic_gradient_exact(self):
        x = param(RNG.normal(size=(6,)) + 0.1)
        err = grad_check(lambda t: tz.sum_sq(t), x)
        assert err < 1e-8
        x.grad = None
        with Tape() as tape:
            loss = tz.sum_sq(x)
            tape.backward(loss)
        np.testing.assert_allclose(x.grad, 2 * x.values, rtol=1e-12)

    def test_grad_accumulates_over_fanout(self):
        x = param(np.array([2.0]))
        with Tape() as tape:
            y = tz.add(x, x)
            tape.backward(tz.sum_sq(y))
        # d/dx (2x)^2 = 8x
        np.testing.assert_allclose(x.grad, [16.0])

    def test_no_tape_records_nothing(self):
        x = param(np.ones((2, 2)))
        out = tz.matmul(x, x)
        assert out._traced is False and x.grad is None

    def test_backward_needs_scalar(self):
        x = param(np.ones((2, 2)))
        with Tape() as tape:
            y = tz.add(x, x)
            with pytest.raises(ShapeError):
                tape.backward(y)

    def test_rank_cap(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2, 2, 2)))

    def test_validate_finite(self):
        tz.validate_finite(Tensor([1.0, 2.0]))
        with pytest.raises(NumericError):
            tz.validate_finite(Tensor([1.0, np.nan]))


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["matmul", "softmax", "ln", "gelu", "mix"]))
def test_random_ops_pass_grad_check(seed, kind):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    n = int(rng.integers(2, 6))
    x = param(rng.normal(size=(m, n)))
    if kind == "matmul":
        w = rng.normal(size=(n, 3))
        fn = lambda t: tz.sum_sq(tz.matmul(t, Tensor(w)))
    elif kind == "softmax":
        fn = lambda t: tz.sum_sq(tz.softmax_rows(t))
    elif kind == "ln":
        g, b = Tensor(rng.normal(size=n)), Tensor(rng.normal(size=n))
        fn = lambda t: tz.sum_sq(tz.layer_norm(t, g, b))
    elif kind == "gelu":
        fn = lambda t: tz.sum_abs(tz.gelu(t))
    else:
        w = rng.normal(size=(n, n))
        g, b = Tensor(np.ones(n)), Tensor(np.zeros(n))
        fn = lambda t: tz.mean(tz.gelu(tz.matmul(tz.layer_norm(t, g, b), Tensor(w))))
    assert grad_check(fn, x) < 1e-4


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=8))
def test_softmax_row_sums_property(row):
    out = tz.softmax_rows(Tensor([row]))
    assert abs(out.values.sum() - 1.0) <= 1e-12
    assert (out.values >= 0).all() and (out.values <= 1).all()
