import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from waveguide_mps import DenseTensor, SvdTruncation, contract, truncated_svd
from waveguide_mps.errors import ArgumentError, DimensionError

from conftest import random_complex


def householder(rng, n):
    v = random_complex(rng, n)
    v /= np.linalg.norm(v)
    return np.eye(n) - 2.0 * np.outer(v, v.conj())


class TestDenseTensor:
    def test_flat_data_fills_shape_row_major(self):
        t = DenseTensor(np.arange(6), shape=[2, 3])
        assert t.shape == (2, 3)
        assert t.to_numpy()[1, 0] == 3

    def test_rank_zero_is_rejected(self):
        with pytest.raises(ArgumentError):
            DenseTensor(1.0)

    def test_size_mismatch_is_dimension_error(self):
        with pytest.raises(DimensionError):
            DenseTensor(np.arange(5), shape=[2, 3])

    def test_values_are_immutable(self):
        t = DenseTensor(np.ones((2, 2)))
        with pytest.raises(ValueError):
            t.to_numpy()[0, 0] = 5


class TestContract:
    def test_matrix_product(self, rng):
        a, b = random_complex(rng, 2, 3), random_complex(rng, 3, 4)
        c = contract(DenseTensor(a), DenseTensor(b), [(1, 0)])
        assert c.shape == (2, 4)
        np.testing.assert_allclose(c.to_numpy(), a @ b, rtol=1e-13)

    def test_identity_leaves_operand_unchanged(self, rng):
        b = random_complex(rng, 5, 3)
        c = contract(DenseTensor(np.eye(5)), DenseTensor(b), [(1, 0)])
        np.testing.assert_allclose(c.to_numpy(), b, rtol=0, atol=1e-15)

    def test_matches_naive_triple_loop(self, rng):
        a, b = random_complex(rng, 3, 4, 5), random_complex(rng, 5, 2, 4)
        c = contract(DenseTensor(a), DenseTensor(b), [(1, 2), (2, 0)]).to_numpy()
        ref = np.zeros((3, 2), dtype=complex)
        for i in range(3):
            for j in range(2):
                for p in range(4):
                    for q in range(5):
                        ref[i, j] += a[i, p, q] * b[q, j, p]
        assert np.abs(c - ref).max() <= 1e-12 * np.abs(ref).max()

    def test_pairwise_equals_flattened_matrix_product(self, rng):
        a, b = random_complex(rng, 3, 4, 5), random_complex(rng, 4, 5, 6)
        c = contract(DenseTensor(a), DenseTensor(b), [(1, 0), (2, 1)]).to_numpy()
        ref = a.reshape(3, 20) @ b.reshape(20, 6)
        assert np.abs(c - ref).max() <= 1e-12 * np.abs(ref).max()

    def test_full_contraction_is_shape_one(self, rng):
        a = random_complex(rng, 3)
        c = contract(DenseTensor(a), DenseTensor(a.conj()), [(0, 0)])
        assert c.shape == (1,)

    def test_mismatched_extents(self):
        with pytest.raises(DimensionError):
            contract(DenseTensor(np.ones((2, 3))), DenseTensor(np.ones((4, 2))), [(1, 0)])

    def test_repeated_axis(self):
        with pytest.raises(ArgumentError):
            contract(DenseTensor(np.ones((2, 2))), DenseTensor(np.ones((2, 2))), [(0, 0), (0, 1)])

    @given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), st.integers(0, 2**31))
    def test_bilinear_in_scalar(self, alpha, seed):
        rng = np.random.default_rng(seed)
        a, b = random_complex(rng, 3, 4), random_complex(rng, 4, 2)
        lhs = contract(DenseTensor(a) * alpha, DenseTensor(b), [(1, 0)]).to_numpy()
        rhs = alpha * contract(DenseTensor(a), DenseTensor(b), [(1, 0)]).to_numpy()
        assert np.abs(lhs - rhs).max() <= 1e-12 * max(np.abs(rhs).max(), 1e-300)


class TestTruncatedSvd:
    def test_exact_low_rank(self):
        u, s, v, w = truncated_svd(DenseTensor(np.diag([2.0, 1.0, 0.0])), SvdTruncation(2, 0.0))
        np.testing.assert_allclose(s, [2.0, 1.0])
        assert w == 0.0

    def test_identity(self):
        _, s, _, w = truncated_svd(DenseTensor(np.eye(4)), SvdTruncation(4, 0.0))
        np.testing.assert_allclose(s, np.ones(4))
        assert w == 0.0

    def test_discarded_weight_matches_full_svd(self, rng):
        m = random_complex(rng, 20, 20)
        _, s, _, w = truncated_svd(DenseTensor(m), SvdTruncation(5, 0.0))
        full = np.linalg.svd(m, compute_uv=False)
        ref = np.sum(full[5:] ** 2) / np.sum(full**2)
        assert len(s) == 5
        assert abs(w - ref) <= 1e-10

    def test_tolerance_sets_rank(self):
        m = np.diag([1.0, 0.1, 0.01, 0.001])
        _, s, _, w = truncated_svd(DenseTensor(m), SvdTruncation(10, 1e-4))
        # squared values 1, 1e-2, 1e-4, 1e-6: dropping the last two discards 0.9999e-4 of the total
        assert len(s) == 2
        assert w <= 1e-4

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31))
    def test_full_rank_reconstructs(self, m, n, seed):
        rng = np.random.default_rng(seed)
        a = random_complex(rng, m, n)
        u, s, v, w = truncated_svd(DenseTensor(a), SvdTruncation(min(m, n), 0.0))
        rec = u.to_numpy() @ np.diag(s) @ v.to_numpy()
        assert np.linalg.norm(rec - a) <= 1e-10 * np.linalg.norm(a)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)

    @given(st.integers(2, 7), st.integers(0, 2**31))
    def test_singular_values_unitarily_invariant(self, n, seed):
        rng = np.random.default_rng(seed)
        a = random_complex(rng, n, n)
        trunc = SvdTruncation(n, 0.0)
        s0 = truncated_svd(DenseTensor(a), trunc)[1]
        s1 = truncated_svd(DenseTensor(householder(rng, n) @ a @ householder(rng, n)), trunc)[1]
        assert np.abs(s0 - s1).max() <= 1e-10 * s0.max()

    def test_reconstruction_error_equals_discarded_weight(self, rng):
        a = random_complex(rng, 12, 9)
        u, s, v, w = truncated_svd(DenseTensor(a), SvdTruncation(4, 0.0))
        rec = u.to_numpy() @ np.diag(s) @ v.to_numpy()
        assert abs(np.linalg.norm(rec - a) ** 2 / np.linalg.norm(a) ** 2 - w) <= 1e-12

    def test_is_deterministic(self, rng):
        a = random_complex(rng, 10, 7)
        r1 = truncated_svd(DenseTensor(a), SvdTruncation(3, 0.0))
        r2 = truncated_svd(DenseTensor(a), SvdTruncation(3, 0.0))
        assert np.array_equal(r1[0].to_numpy(), r2[0].to_numpy())

    def test_invalid_truncation(self):
        with pytest.raises(ArgumentError):
            SvdTruncation(0, 0.0)
        with pytest.raises(ArgumentError):
            SvdTruncation(3, 1.0)
