import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.shaping import (
    AmplitudeAlphabet,
    AmplitudeSequence,
    Composition,
    CompositionMismatchError,
    NonCodewordError,
    bits_to_int,
    ccdm_decode,
    ccdm_encode,
    composition_from_pmf,
    encode_random_blocks,
    entropy_bits,
    input_bit_length,
    int_to_bits,
    lumped_sequence,
    max_run_length,
    num_sequences,
    rate_loss,
)


class TestAlphabet:
    def test_ask_levels(self):
        alphabet = AmplitudeAlphabet.ask([0.4, 0.3, 0.2, 0.1])
        assert alphabet.amplitudes == (1.0, 3.0, 5.0, 7.0)
        assert alphabet.arity == 4

    @pytest.mark.parametrize("amplitudes, pmf", [
        ((1, 3), (0.5, 0.4)),          # does not sum to 1
        ((1, 3), (1.0,)),              # length mismatch
        ((3, 1), (0.5, 0.5)),          # not increasing
        ((0, 1), (0.5, 0.5)),          # non-positive amplitude
        ((1, 3), (1.0, 0.0)),          # zero probability
    ])
    def test_invalid_alphabet(self, amplitudes, pmf):
        with pytest.raises(ValueError):
            AmplitudeAlphabet(amplitudes, pmf)

    def test_entropy(self, shaped_alphabet):
        assert entropy_bits(shaped_alphabet) == pytest.approx(1.846439, abs=1e-6)
        assert entropy_bits(AmplitudeAlphabet.uniform_ask(4)) == pytest.approx(2.0)


class TestComposition:
    @pytest.mark.parametrize("n, expected", [
        (10, (4, 3, 2, 1)),
        (100, (40, 30, 20, 10)),
        (20, (8, 6, 4, 2)),
        (12, (5, 4, 2, 1)),
    ])
    def test_default_pmf(self, shaped_alphabet, n, expected):
        assert composition_from_pmf(shaped_alphabet, n).counts == expected

    def test_ties_go_to_lower_index(self):
        c = composition_from_pmf(AmplitudeAlphabet.uniform_ask(4), 6)
        assert c.counts == (2, 2, 1, 1)

    @pytest.mark.parametrize("n", [0, -4, 3])
    def test_rejects_short_blocks(self, shaped_alphabet, n):
        with pytest.raises(ValueError):
            composition_from_pmf(shaped_alphabet, n)

    @given(st.integers(min_value=4, max_value=5000))
    def test_counts_sum_to_n(self, n):
        c = composition_from_pmf(AmplitudeAlphabet.ask([0.4, 0.3, 0.2, 0.1]), n)
        assert c.n == n
        assert all(abs(count - n * p) < 1 for count, p in zip(c.counts, [0.4, 0.3, 0.2, 0.1]))

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            Composition((1, -1))
        with pytest.raises(ValueError):
            Composition((0, 0))


class TestCounting:
    def test_num_sequences_small(self, composition_4321):
        assert num_sequences(composition_4321) == 12600
        assert input_bit_length(composition_4321) == 13

    def test_num_sequences_exact_big_integer(self):
        total = num_sequences(Composition((40, 30, 20, 10)))
        digits = str(total)
        assert len(digits) == 53
        assert float(total) == pytest.approx(4.9e52, rel=0.01)
        assert digits.startswith('488439594340894')
        assert total == math.factorial(100) // (
            math.factorial(40) * math.factorial(30) * math.factorial(20) * math.factorial(10)
        )

    @given(st.lists(st.integers(min_value=0, max_value=30), min_size=1, max_size=6).filter(any), st.randoms(use_true_random=False))
    def test_num_sequences_ignores_count_order(self, counts, random):
        shuffled = list(counts)
        random.shuffle(shuffled)
        assert num_sequences(Composition(tuple(shuffled))) == num_sequences(Composition(tuple(counts)))

    def test_single_amplitude_block(self):
        c = Composition((5,))
        assert num_sequences(c) == 1
        assert input_bit_length(c) == 0
        assert list(ccdm_encode([], c).symbols) == [0] * 5
        assert ccdm_decode(AmplitudeSequence(np.zeros(5, dtype=int)), c).size == 0

    def test_bits_conversion(self):
        assert bits_to_int([1, 0, 1]) == 5
        assert list(int_to_bits(5, 3)) == [1, 0, 1]
        assert list(int_to_bits(1, 4)) == [0, 0, 0, 1]
        with pytest.raises(ValueError):
            bits_to_int([0, 2])


class TestEncodeDecode:
    def test_all_zero_input_is_first_arrangement(self, composition_4321):
        seq = ccdm_encode([0] * 13, composition_4321)
        assert list(seq.symbols) == [0, 0, 0, 0, 1, 1, 1, 2, 2, 3]

    def test_two_symbol_composition(self):
        c = Composition((1, 1))
        assert list(ccdm_encode([0], c).symbols) == [0, 1]
        assert list(ccdm_encode([1], c).symbols) == [1, 0]

    def test_wrong_input_length(self, composition_4321):
        with pytest.raises(ValueError, match='13 bits'):
            ccdm_encode([0] * 12, composition_4321)

    def test_composition_mismatch(self, composition_4321):
        with pytest.raises(CompositionMismatchError):
            ccdm_decode(AmplitudeSequence(np.array([0, 0, 0, 0, 0, 1, 1, 2, 2, 3])), composition_4321)
        with pytest.raises(CompositionMismatchError):
            ccdm_decode(AmplitudeSequence(np.array([0, 1, 2, 3])), composition_4321)

    def test_sequence_outside_encoder_image(self, composition_4321):
        # Rank 2 in lexicographic order; code points 0, 1, 2 land on ranks 0, 1, 3
        with pytest.raises(NonCodewordError):
            ccdm_decode(AmplitudeSequence(np.array([0, 0, 0, 0, 1, 1, 1, 3, 2, 2])), composition_4321)

    def test_exhaustive_bijection(self):
        c = Composition((3, 2, 2, 1))
        k = input_bit_length(c)
        assert k == 10
        seen = set()
        for b in range(1 << k):
            seq = ccdm_encode(int_to_bits(b, k), c)
            assert seq.histogram(4) == c.counts
            seen.add(tuple(seq.symbols))
            assert bits_to_int(ccdm_decode(seq, c)) == b
        assert len(seen) == 1 << k

    def test_output_order_follows_input_order(self, composition_4321):
        k = input_bit_length(composition_4321)
        codewords = [tuple(ccdm_encode(int_to_bits(b, k), composition_4321).symbols) for b in range(0, 1 << k, 97)]
        assert codewords == sorted(codewords)

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_round_trip_n100(self, data):
        c = Composition((40, 30, 20, 10))
        k = input_bit_length(c)
        bits = data.draw(st.lists(st.integers(0, 1), min_size=k, max_size=k))
        seq = ccdm_encode(bits, c)
        assert seq.histogram(4) == c.counts
        assert list(ccdm_decode(seq, c)) == bits

    @settings(max_examples=10, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_round_trip_n1000(self, random):
        c = Composition((400, 300, 200, 100))
        k = input_bit_length(c)
        bits = [random.getrandbits(1) for _ in range(k)]
        seq = ccdm_encode(bits, c)
        assert seq.histogram(4) == c.counts
        assert list(ccdm_decode(seq, c)) == bits


    @pytest.mark.parametrize("counts", [
        (4, 3, 2, 1),
        (40, 30, 20, 10),
        pytest.param((400, 300, 200, 100), marks=pytest.mark.slow),
    ])
    def test_round_trip_ten_thousand_inputs(self, counts):
        c = Composition(counts)
        k = input_bit_length(c)
        rng = np.random.default_rng(sum(counts))
        for bits in rng.integers(0, 2, size=(10_000, k)):
            seq = ccdm_encode(bits, c)
            assert seq.histogram(4) == counts
            np.testing.assert_array_equal(ccdm_decode(seq, c), bits)


class TestRandomBlocks:
    def test_codebook_path(self, composition_4321, rng):
        blocks = encode_random_blocks(composition_4321, 200, rng)
        assert blocks.shape == (200, 10)
        for row in blocks:
            assert AmplitudeSequence(row).histogram(4) == (4, 3, 2, 1)
            ccdm_decode(AmplitudeSequence(row), composition_4321)

    def test_big_integer_path(self, rng):
        c = Composition((40, 30, 20, 10))
        blocks = encode_random_blocks(c, 5, rng)
        assert blocks.shape == (5, 100)
        for row in blocks:
            assert AmplitudeSequence(row).histogram(4) == c.counts
            assert ccdm_decode(AmplitudeSequence(row), c).size == input_bit_length(c)

    def test_zero_blocks(self, composition_4321, rng):
        assert encode_random_blocks(composition_4321, 0, rng).shape == (0, 10)

    def test_deterministic_for_seed(self, composition_4321):
        a = encode_random_blocks(composition_4321, 50, np.random.default_rng(7))
        b = encode_random_blocks(composition_4321, 50, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


class TestRateLoss:
    def test_n10(self, shaped_alphabet, composition_4321):
        assert rate_loss(composition_4321, shaped_alphabet) == pytest.approx(1.846439 - 1.3, abs=1e-6)

    def test_decreases_with_block_length(self, shaped_alphabet):
        losses = [rate_loss(composition_from_pmf(shaped_alphabet, n), shaped_alphabet) for n in (10, 100, 1000)]
        assert losses[0] > losses[1] > losses[2] > 0

    def test_arity_mismatch(self, shaped_alphabet):
        with pytest.raises(ValueError):
            rate_loss(Composition((1, 1)), shaped_alphabet)


class TestRunStructure:
    def test_lumped_sequence(self, composition_4321):
        seq = lumped_sequence(composition_4321, 2)
        assert seq.size == 20
        assert list(seq[:8]) == [0] * 8
        assert max_run_length(seq) == 8

    def test_max_run_length(self):
        assert max_run_length([]) == 0
        assert max_run_length([1, 1, 2, 2, 2, 1]) == 3
        assert max_run_length([5]) == 1

    def test_short_blocks_bound_runs(self, composition_4321, rng):
        blocks = encode_random_blocks(composition_4321, 1000, rng)
        # A run can span at most two blocks of composition [4,3,2,1]
        assert max_run_length(blocks.ravel()) <= 8
