import math

import numpy as np
import pytest

from conftest import freq_tolerance, make_random_basis
from hselab.bases import fourier_basis, standard_basis
from hselab.errors import DimensionError, InvalidParameter, NumericalError
from hselab.hilbert import (
    TAU_NORM,
    Basis,
    StateVector,
    born_probabilities,
    born_sample,
    overlap,
    sample_from_probs,
    standard_vector,
    transition_prob,
    verify_orthonormal,
)
from hselab.rng import RandomStream


def random_state(d, seed):
    stream = RandomStream(seed, "state")
    raw = np.array(
        [complex(stream.uniform() - 0.5, stream.uniform() - 0.5) for _ in range(d)]
    )
    return StateVector(raw / np.linalg.norm(raw))


class TestStateVector:
    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidParameter):
            StateVector([1.0, 1.0])

    def test_rejects_dimension_one(self):
        with pytest.raises(InvalidParameter):
            StateVector([1.0])

    def test_rejects_nan(self):
        with pytest.raises(InvalidParameter):
            StateVector([float("nan"), 0.0])

    def test_accepts_within_tolerance(self):
        eps = 0.4 * TAU_NORM
        vec = StateVector([math.sqrt(1.0 + eps), 0.0])
        assert vec.dim == 2

    def test_amps_immutable(self):
        vec = standard_vector(3, 0)
        with pytest.raises(ValueError):
            vec.amps[0] = 0.0


class TestOverlap:
    def test_self_overlap_is_one(self):
        for d, seed in [(2, 1), (5, 2), (7, 3)]:
            amp = overlap(random_state(d, seed), random_state(d, seed))
            assert abs(amp - 1.0) <= TAU_NORM

    def test_standard_vs_fourier_column(self):
        e0 = standard_vector(3, 0)
        col0 = fourier_basis(3).vectors[0]
        assert overlap(e0, col0) == pytest.approx(1 / math.sqrt(3), abs=1e-15)

    def test_rotated_qubit(self):
        # direct evaluation: <e0 | (cos t, sin t)> = cos t
        t = math.pi / 8
        v = StateVector([math.cos(t), math.sin(t)])
        assert overlap(standard_vector(2, 0), v) == pytest.approx(math.cos(t), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            overlap(standard_vector(2, 0), standard_vector(3, 0))

    def test_conjugate_symmetry(self):
        for seed in range(10):
            u = random_state(4, 2 * seed)
            v = random_state(4, 2 * seed + 1)
            fwd = overlap(u, v)
            rev = overlap(v, u)
            assert abs(fwd.real - rev.real) <= 1e-15
            assert abs(fwd.imag + rev.imag) <= 1e-15


class TestTransitionProb:
    def test_identical_states(self):
        v = random_state(3, 11)
        assert transition_prob(v, v) == pytest.approx(1.0, abs=TAU_NORM)

    def test_fourier_columns_uniform(self):
        for d in (2, 3, 6):
            f = fourier_basis(d)
            for j in range(d):
                p = transition_prob(standard_vector(d, 0), f.vectors[j])
                assert p == pytest.approx(1.0 / d, abs=1e-12)

    def test_orthogonal_states(self):
        assert transition_prob(standard_vector(4, 0), standard_vector(4, 3)) == 0.0

    def test_clamps_to_unit_interval(self):
        v = random_state(5, 12)
        assert 0.0 <= transition_prob(v, v) <= 1.0


class TestBornSample:
    def test_eigenstate_is_deterministic(self):
        basis = fourier_basis(4)
        stream = RandomStream(0)
        assert all(born_sample(basis.vectors[2], basis, stream) == 2 for _ in range(50))

    def test_uniform_frequencies(self):
        basis = fourier_basis(3)
        state = standard_vector(3, 0)
        stream = RandomStream(77)
        n = 100_000
        counts = np.bincount([born_sample(state, basis, stream) for _ in range(n)], minlength=3)
        assert np.all(np.abs(counts / n - 1 / 3) < 0.01)

    def test_deterministic_given_stream(self):
        basis = fourier_basis(3)
        state = standard_vector(3, 1)
        seq1 = [born_sample(state, basis, RandomStream(5, k)) for k in range(100)]
        seq2 = [born_sample(state, basis, RandomStream(5, k)) for k in range(100)]
        assert seq1 == seq2

    def test_empirical_matches_born_probabilities(self):
        basis = make_random_basis(3, 902)
        state = random_state(3, 903)
        probs = born_probabilities(basis, state)
        stream = RandomStream(41)
        n = 60_000
        counts = np.bincount([born_sample(state, basis, stream) for _ in range(n)], minlength=3)
        for j in range(3):
            assert abs(counts[j] / n - probs[j]) < freq_tolerance(probs[j], n)

    def test_corrupt_basis_raises(self):
        matrix = np.eye(3, dtype=complex)
        matrix[0, 0] = 1.01
        broken = Basis("broken", matrix, validate=False)
        with pytest.raises(NumericalError):
            born_sample(standard_vector(3, 0), broken, RandomStream(0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            born_sample(standard_vector(2, 0), fourier_basis(3), RandomStream(0))

    def test_probabilities_sum_to_one(self):
        for d, seed in [(2, 31), (5, 32), (7, 33)]:
            basis = make_random_basis(d, seed)
            state = random_state(d, seed + 100)
            assert abs(born_probabilities(basis, state).sum() - 1.0) <= d * TAU_NORM


class TestSampleFromProbs:
    def test_inverts_cdf(self):
        probs = np.array([0.25, 0.5, 0.25])
        assert sample_from_probs(probs, 0.0) == 0
        assert sample_from_probs(probs, 0.24) == 0
        assert sample_from_probs(probs, 0.25) == 1
        assert sample_from_probs(probs, 0.74) == 1
        assert sample_from_probs(probs, 0.75) == 2
        assert sample_from_probs(probs, 0.999999) == 2

    def test_zero_leading_probability(self):
        assert sample_from_probs(np.array([0.0, 1.0]), 0.0) == 1

    def test_never_exceeds_range(self):
        probs = np.array([0.5, 0.5 - 1e-12])
        assert sample_from_probs(probs, 1.0 - 1e-16) == 1


class TestVerifyOrthonormal:
    def test_standard_basis_exact(self):
        report = verify_orthonormal(standard_basis(5), TAU_NORM)
        assert report.ok and report.max_deviation == 0.0

    def test_fourier_six_within_tight_tolerance(self):
        assert verify_orthonormal(fourier_basis(6), 1e-12).ok

    def test_scaled_vector_detected(self):
        matrix = np.eye(4, dtype=complex)
        matrix[:, 1] *= 1.01
        report = verify_orthonormal(matrix, TAU_NORM)
        assert not report.ok and report.max_deviation > 1e-3

    def test_requires_positive_tolerance(self):
        with pytest.raises(InvalidParameter):
            verify_orthonormal(standard_basis(2), 0.0)


def test_basis_construction_rejects_nonorthonormal():
    matrix = np.ones((2, 2), dtype=complex) / math.sqrt(2)
    with pytest.raises(InvalidParameter):
        Basis("bad", matrix)
