"""Tensor conventions: coercion, ordered sums, sign splits, resizing."""

from fractions import Fraction

import numpy as np
import pytest

from relprop.errors import DataError
from relprop.tensor import (DTYPE, as_tensor, bilinear_resize, check_finite,
                            split_pos_neg, sum_all)


class TestAsTensor:
    def test_dtype_and_contiguity(self):
        t = as_tensor([[1, 2], [3, 4]])
        assert t.dtype == DTYPE
        assert t.flags["C_CONTIGUOUS"]

    def test_reshape(self):
        t = as_tensor(range(6), shape=(2, 3))
        assert t.shape == (2, 3)
        assert t[1, 0] == 3.0

    def test_noncontiguous_input_copied(self):
        base = np.arange(16, dtype=DTYPE).reshape(4, 4)
        t = as_tensor(base.T)
        assert t.flags["C_CONTIGUOUS"]
        assert np.array_equal(t, base.T)


class TestCheckFinite:
    def test_passes_finite(self):
        check_finite(np.zeros(3, dtype=DTYPE))

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_raises_with_context(self, bad):
        t = np.array([1.0, bad], dtype=DTYPE)
        with pytest.raises(DataError, match="gradient buffer"):
            check_finite(t, context="gradient buffer")


class TestSumAll:
    def test_known_total(self):
        assert sum_all(np.array([[1.5, 2.5], [3.0, -1.0]], dtype=DTYPE)) == 6.0

    def test_matches_sequential_scan(self):
        rng = np.random.default_rng(11)
        t = rng.standard_normal((5, 7)).astype(DTYPE)
        scan = np.cumsum(t.reshape(-1).astype(np.float64))[-1]
        assert sum_all(t) == float(scan)

    def test_repeatable(self):
        rng = np.random.default_rng(12)
        t = rng.standard_normal(1000).astype(DTYPE)
        assert sum_all(t) == sum_all(t.copy())

    def test_million_small_terms_accumulate_tightly(self):
        # 1e6 * 1e-3 = 1000; a 32-bit running sum drifts well past 1e-6
        t = np.full(1_000_000, 1e-3, dtype=np.float64)
        assert abs(sum_all(t) - 1000.0) < 1e-6

    def test_million_terms_match_exact_rational_sum(self):
        # the stored float32 value is not exactly 1e-3, so compare against
        # the exact rational total of what the tensor actually holds
        t = np.full(1_000_000, 1e-3, dtype=DTYPE)
        exact = 1_000_000 * Fraction(float(t[0]))
        assert abs(Fraction(sum_all(t)) - exact) < Fraction(1, 10**6)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sum_all(np.zeros((0,), dtype=DTYPE))


class TestSplitPosNeg:
    def test_recombination_exact(self):
        rng = np.random.default_rng(13)
        t = rng.standard_normal((4, 4)).astype(DTYPE)
        pos, neg = split_pos_neg(t)
        assert np.array_equal(pos + neg, t)

    def test_parts_disjoint(self):
        t = np.array([-2.0, 0.0, 3.0], dtype=DTYPE)
        pos, neg = split_pos_neg(t)
        assert np.array_equal(pos, [0.0, 0.0, 3.0])
        assert np.array_equal(neg, [-2.0, 0.0, 0.0])
        assert not np.any((pos != 0) & (neg != 0))


class TestBilinearResize:
    def test_identity_bit_exact(self):
        rng = np.random.default_rng(14)
        t = rng.standard_normal((6, 5)).astype(DTYPE)
        out = bilinear_resize(t, 6, 5)
        assert np.array_equal(out, t)
        assert out is not t

    def test_corners_preserved_on_upscale(self):
        t = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=DTYPE)
        out = bilinear_resize(t, 5, 5)
        assert out[0, 0] == 1.0
        assert out[0, -1] == 2.0
        assert out[-1, 0] == 3.0
        assert out[-1, -1] == 4.0

    def test_constant_stays_constant(self):
        t = np.full((3, 3), 0.7, dtype=DTYPE)
        out = bilinear_resize(t, 11, 7)
        assert np.allclose(out, 0.7, atol=1e-7)

    def test_linear_ramp_reproduced(self):
        # bilinear interpolation is exact on affine functions of (y, x)
        h, w = 4, 6
        t = (np.arange(h)[:, None] + 2.0 * np.arange(w)[None, :]).astype(DTYPE)
        out = bilinear_resize(t, 7, 11)
        ys = np.arange(7) * (h - 1) / 6.0
        xs = np.arange(11) * (w - 1) / 10.0
        expect = ys[:, None] + 2.0 * xs[None, :]
        assert np.allclose(out, expect, atol=1e-5)

    def test_two_by_four_thirds(self):
        t = np.array([[0.0, 1.0], [0.0, 1.0]], dtype=DTYPE)
        out = bilinear_resize(t, 2, 4)
        expect = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
        np.testing.assert_allclose(out[0], expect, atol=1e-7)
        np.testing.assert_allclose(out[1], expect, atol=1e-7)

    def test_single_row_output_samples_center(self):
        t = np.array([[0.0], [2.0], [4.0]], dtype=DTYPE)
        out = bilinear_resize(t, 1, 1)
        assert out.shape == (1, 1)
        assert out[0, 0] == 2.0

    def test_one_by_one_input_replicates(self):
        t = np.array([[5.0]], dtype=DTYPE)
        out = bilinear_resize(t, 3, 4)
        assert np.array_equal(out, np.full((3, 4), 5.0, dtype=DTYPE))

    def test_rejects_bad_rank_and_size(self):
        with pytest.raises(ValueError, match="2-D"):
            bilinear_resize(np.zeros((2, 2, 2), dtype=DTYPE), 4, 4)
        with pytest.raises(ValueError, match=">= 1"):
            bilinear_resize(np.zeros((2, 2), dtype=DTYPE), 0, 4)

    def test_output_dtype(self):
        out = bilinear_resize(np.zeros((2, 2), dtype=DTYPE), 3, 3)
        assert out.dtype == DTYPE
