import numpy as np
import pytest

from sparsemkl import (
    ContractViolation,
    Dataset,
    GaussianFamily,
    GramBlocks,
    LinearGroupProjection,
    PowerIterationError,
    assemble_gram_blocks,
    operator_norm,
)


class TestKernelSpecs:
    def test_linear_rejects_nonpositive_dims(self):
        with pytest.raises(ContractViolation):
            LinearGroupProjection((2, 0, 1))

    def test_gaussian_rejects_nonpositive_sigma(self):
        with pytest.raises(ContractViolation):
            GaussianFamily((1.0, -0.5))

    def test_linear_dims_must_cover_columns(self):
        ds = Dataset(np.ones((3, 4)), np.zeros(3))
        with pytest.raises(ContractViolation):
            assemble_gram_blocks(ds, LinearGroupProjection((2, 3)))


class TestLinearAssembly:
    def test_blocks_are_group_grams(self, rng):
        dims = (2, 1, 3)
        X = rng.standard_normal((5, 6))
        gram = assemble_gram_blocks(Dataset(X, np.zeros(5)), LinearGroupProjection(dims))
        offset = 0
        for g, d in enumerate(dims):
            Xg = X[:, offset : offset + d]
            assert np.allclose(gram.blocks[g], Xg @ Xg.T, atol=1e-12)
            offset += d
        assert gram.group_dims == dims

    def test_rank_bounded_by_group_width(self, rng):
        # scalar groups on a tall matrix: every block has rank <= 1
        X = rng.standard_normal((6, 3))
        gram = assemble_gram_blocks(
            Dataset(X, np.zeros(6)), LinearGroupProjection((1, 1, 1))
        )
        for g in range(3):
            s = np.linalg.svd(gram.blocks[g], compute_uv=False)
            assert np.sum(s > 1e-10 * s[0]) <= 1

    def test_validated_by_gram_blocks_contract(self, rng):
        # assembly output must satisfy the same symmetry/PSD/sum checks
        # a hand-built GramBlocks would face
        X = rng.standard_normal((4, 5))
        gram = assemble_gram_blocks(
            Dataset(X, np.zeros(4)), LinearGroupProjection((2, 3))
        )
        rebuilt = GramBlocks(
            blocks=gram.blocks,
            block_sum=gram.block_sum,
            lipschitz=gram.lipschitz,
            group_dims=gram.group_dims,
        )
        assert rebuilt.n_groups == 2


class TestGaussianAssembly:
    def test_diagonal_exactly_one(self, rng):
        X = rng.standard_normal((6, 2))
        gram = assemble_gram_blocks(Dataset(X, np.zeros(6)), GaussianFamily((0.5, 2.0)))
        for g in range(2):
            assert np.array_equal(np.diag(gram.blocks[g]), np.ones(6))

    def test_duplicate_points_duplicate_rows(self, rng):
        X = rng.standard_normal((4, 3))
        X[2] = X[0]
        gram = assemble_gram_blocks(Dataset(X, np.zeros(4)), GaussianFamily((1.0,)))
        K = gram.blocks[0]
        assert np.array_equal(K[0], K[2])
        assert np.array_equal(K[:, 0], K[:, 2])

    def test_entries_in_unit_interval(self, rng):
        X = rng.standard_normal((8, 2))
        gram = assemble_gram_blocks(Dataset(X, np.zeros(8)), GaussianFamily((0.3, 1.0)))
        assert np.all(gram.blocks > 0.0)
        assert np.all(gram.blocks <= 1.0)

    def test_offdiagonal_monotone_in_bandwidth(self, rng):
        X = rng.standard_normal((6, 2))
        gram = assemble_gram_blocks(
            Dataset(X, np.zeros(6)), GaussianFamily((0.5, 1.0, 2.0))
        )
        off = ~np.eye(6, dtype=bool)
        assert np.all(gram.blocks[0][off] < gram.blocks[1][off])
        assert np.all(gram.blocks[1][off] < gram.blocks[2][off])

    def test_exponent_scaling(self):
        # two points at distance d: entry must be exp(-d^2 / (2 sigma^2))
        X = np.array([[0.0], [3.0]])
        gram = assemble_gram_blocks(Dataset(X, np.zeros(2)), GaussianFamily((1.5,)))
        expected = np.exp(-9.0 / (2.0 * 1.5**2))
        assert gram.blocks[0][0, 1] == pytest.approx(expected, rel=1e-15)


class TestOperatorNorm:
    def test_identity_blocks_sum_to_group_count(self):
        G, m = 4, 3
        blocks = np.stack([np.eye(m)] * G)
        gram = GramBlocks(blocks=blocks, block_sum=G * np.eye(m), lipschitz=float(G))
        assert operator_norm(gram) == pytest.approx(G, rel=1e-10)

    def test_two_by_two_closed_form(self):
        block = np.array([[2.0, 1.0], [1.0, 2.0]])
        gram = GramBlocks(blocks=block[None], block_sum=block, lipschitz=3.0)
        assert operator_norm(gram) == pytest.approx(3.0, rel=1e-10)

    def test_matches_dense_eigensolver(self, rng):
        m = 12
        A = rng.standard_normal((m, m))
        block = A @ A.T
        top = float(np.linalg.eigvalsh(block)[-1])
        gram = GramBlocks(blocks=block[None], block_sum=block, lipschitz=top * 1.001)
        assert operator_norm(gram) == pytest.approx(top, rel=1e-8)

    def test_subadditive_across_blocks(self, rng):
        X = rng.standard_normal((7, 6))
        gram = assemble_gram_blocks(
            Dataset(X, np.zeros(7)), LinearGroupProjection((2, 2, 2))
        )
        per_block = sum(
            float(np.linalg.eigvalsh(gram.blocks[g])[-1]) for g in range(3)
        )
        assert operator_norm(gram) <= per_block * (1.0 + 1e-10)

    def test_iteration_cap_raises_with_estimate(self):
        # two nearly equal top eigenvalues force slow convergence
        block = np.diag([1.0, 1.0 - 1e-12, 0.5])
        gram = GramBlocks(blocks=block[None], block_sum=block, lipschitz=1.0)
        with pytest.raises(PowerIterationError) as exc:
            operator_norm(gram, tol=1e-15, max_iter=3)
        assert 0.4 < exc.value.last_estimate <= 1.0 + 1e-9


class TestAssembledStepBound:
    def test_safety_factor_dominates_spectrum(self, rng):
        X = rng.standard_normal((9, 6))
        gram = assemble_gram_blocks(
            Dataset(X, np.zeros(9)), LinearGroupProjection((3, 3))
        )
        top = float(np.linalg.eigvalsh(gram.block_sum)[-1])
        assert gram.lipschitz >= top
        assert gram.lipschitz == pytest.approx(top * 1.01, rel=1e-6)

    def test_all_zero_features_rejected(self):
        ds = Dataset(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(ContractViolation):
            assemble_gram_blocks(ds, LinearGroupProjection((1, 1)))
