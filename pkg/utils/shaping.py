"""
Constant-composition distribution matching (CCDM).

A CCDM maps k uniform bits to a length-n amplitude sequence whose composition
(the count of each amplitude) is fixed. All sequences of one composition are
equally likely under proportional interval subdivision, so the arithmetic-coding
intervals of complete sequences partition [0, 1) into M equal slots ordered
lexicographically by amplitude index. Encoding places the code point b / 2^k and
returns the sequence whose slot contains it; decoding recovers the slot rank and
inverts the placement. All interval bounds are exact integers.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Compositions with at most this many codewords get a precomputed codebook
CODEBOOK_MAX_BITS = 16


class CompositionMismatchError(ValueError):
    """Sequence histogram differs from the composition it is decoded against."""


class NonCodewordError(ValueError):
    """Sequence has the right composition but is never produced by the encoder."""


@dataclass(frozen=True)
class AmplitudeAlphabet:
    amplitudes: Tuple[float, ...]
    target_pmf: Tuple[float, ...]

    def __post_init__(self):
        amplitudes = tuple(float(a) for a in self.amplitudes)
        pmf = tuple(float(p) for p in self.target_pmf)
        object.__setattr__(self, 'amplitudes', amplitudes)
        object.__setattr__(self, 'target_pmf', pmf)

        if not amplitudes:
            raise ValueError("Alphabet needs at least one amplitude")
        if len(amplitudes) != len(pmf):
            raise ValueError(
                f"amplitudes has {len(amplitudes)} entries but target_pmf has {len(pmf)}"
            )
        if any(a <= 0 for a in amplitudes):
            raise ValueError("amplitudes must all be positive")
        if any(b <= a for a, b in zip(amplitudes, amplitudes[1:])):
            raise ValueError("amplitudes must be strictly increasing")
        if any(not (0.0 < p <= 1.0) for p in pmf):
            raise ValueError("target_pmf entries must lie in (0, 1]")
        if abs(math.fsum(pmf) - 1.0) > 1e-12:
            raise ValueError(f"target_pmf must sum to 1, got {math.fsum(pmf)!r}")

    @property
    def arity(self) -> int:
        return len(self.amplitudes)

    @classmethod
    def ask(cls, target_pmf: Sequence[float]) -> 'AmplitudeAlphabet':
        """One-sided ASK levels 1, 3, 5, ... with the given PMF."""
        return cls(tuple(2 * i + 1 for i in range(len(target_pmf))), tuple(target_pmf))

    @classmethod
    def uniform_ask(cls, arity: int) -> 'AmplitudeAlphabet':
        return cls.ask([1.0 / arity] * arity)


@dataclass(frozen=True)
class Composition:
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, 'counts', counts)
        if not counts:
            raise ValueError("Composition needs at least one count")
        if any(c < 0 for c in counts):
            raise ValueError("Composition counts must be non-negative")
        if sum(counts) == 0:
            raise ValueError("Composition must describe a non-empty block")

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def arity(self) -> int:
        return len(self.counts)

    def check_alphabet(self, alphabet: AmplitudeAlphabet) -> None:
        if self.arity != alphabet.arity:
            raise ValueError(
                f"Composition arity {self.arity} does not match alphabet arity {alphabet.arity}"
            )


@dataclass(frozen=True)
class AmplitudeSequence:
    symbols: np.ndarray

    @property
    def length(self) -> int:
        return int(self.symbols.size)

    def histogram(self, arity: int) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.bincount(self.symbols, minlength=arity)[:arity])


def entropy_bits(alphabet: AmplitudeAlphabet) -> float:
    """Entropy of the alphabet's target PMF in bits."""
    return -math.fsum(p * math.log2(p) for p in alphabet.target_pmf)


def composition_from_pmf(alphabet: AmplitudeAlphabet, n: int) -> Composition:
    """
    Quantize the target PMF to integer counts summing to n.

    Largest-remainder apportionment: every amplitude gets floor(n * p_i) and the
    leftover units go to the largest fractional parts, ties broken toward the
    higher-probability amplitude and then the lower index.

    Args:
        alphabet: Amplitude alphabet with its target PMF
        n: Block length

    Returns:
        Composition with counts summing to n

    Raises:
        ValueError: If n is not positive or smaller than the alphabet arity
    """
    if n <= 0:
        raise ValueError(f"Block length must be positive, got {n}")
    if n < alphabet.arity:
        raise ValueError(f"Block length {n} is shorter than the alphabet arity {alphabet.arity}")
    if any(p <= 0 for p in alphabet.target_pmf):
        raise ValueError("target_pmf has a zero entry; every amplitude must be reachable")

    quotas = [n * p for p in alphabet.target_pmf]
    # Products like 0.3 * 10 land a hair above or below the integer
    floors = [int(math.floor(q + 1e-9)) for q in quotas]
    leftover = n - sum(floors)
    order = sorted(
        range(alphabet.arity),
        key=lambda i: (-(quotas[i] - floors[i]), -alphabet.target_pmf[i], i),
    )
    counts = list(floors)
    for i in order[:leftover]:
        counts[i] += 1
    return Composition(tuple(counts))


def num_sequences(c: Composition) -> int:
    """Multinomial coefficient n! / prod(counts_i!), computed exactly."""
    total = 1
    remaining = c.n
    for count in c.counts:
        total *= math.comb(remaining, count)
        remaining -= count
    return total


def input_bit_length(c: Composition) -> int:
    """k = floor(log2(num_sequences(c)))."""
    return num_sequences(c).bit_length() - 1


def bits_to_int(bits: Sequence[int]) -> int:
    """MSB-first bit vector to integer."""
    value = 0
    for bit in bits:
        if bit not in (0, 1):
            raise ValueError(f"Bit vector may only contain 0 and 1, got {bit!r}")
        value = (value << 1) | int(bit)
    return value


def int_to_bits(value: int, k: int) -> np.ndarray:
    """Integer to an MSB-first bit vector of length k."""
    return np.array([(value >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)


def _unrank(rank: int, counts: Sequence[int], total: int) -> np.ndarray:
    """Sequence at lexicographic position `rank` among the `total` arrangements."""
    remaining = list(counts)
    m = sum(remaining)
    out = np.empty(m, dtype=np.int64)
    for pos in range(m):
        for j, cj in enumerate(remaining):
            if cj == 0:
                continue
            # Sub-interval width of amplitude j, scaled by the total count
            width = total * cj // m
            if rank < width:
                out[pos] = j
                remaining[j] -= 1
                total = width
                break
            rank -= width
        m -= 1
    return out


def _rank(symbols: Sequence[int], counts: Sequence[int], total: int) -> int:
    remaining = list(counts)
    m = sum(remaining)
    rank = 0
    for s in symbols:
        for j in range(s):
            if remaining[j]:
                rank += total * remaining[j] // m
        total = total * remaining[s] // m
        remaining[s] -= 1
        m -= 1
    return rank


def ccdm_encode(data_bits: Sequence[int], c: Composition) -> AmplitudeSequence:
    """
    Map exactly k = input_bit_length(c) bits to a sequence of composition c.

    The all-zero input selects the lowest code point, i.e. the lexicographically
    first arrangement (amplitudes in ascending index order).

    Raises:
        ValueError: If the bit vector length is not k
    """
    k = input_bit_length(c)
    bits = list(data_bits)
    if len(bits) != k:
        raise ValueError(f"CCDM input must be exactly {k} bits for composition {c.counts}, got {len(bits)}")
    return AmplitudeSequence(_encode_index(bits_to_int(bits), c))


def _encode_index(b: int, c: Composition) -> np.ndarray:
    k = input_bit_length(c)
    total = num_sequences(c)
    rank = (b * total) >> k
    return _unrank(rank, c.counts, total)


def ccdm_decode(seq: AmplitudeSequence, c: Composition) -> np.ndarray:
    """
    Recover the k input bits from an encoder output.

    Raises:
        CompositionMismatchError: If the sequence histogram differs from c
        NonCodewordError: If the sequence has composition c but no input maps to it
    """
    symbols = np.asarray(seq.symbols)
    if symbols.size != c.n or np.any(symbols < 0) or np.any(symbols >= c.arity):
        raise CompositionMismatchError(
            f"Sequence of length {symbols.size} cannot have composition {c.counts}"
        )
    hist = tuple(int(v) for v in np.bincount(symbols, minlength=c.arity))
    if hist != c.counts:
        raise CompositionMismatchError(f"Sequence composition {hist} differs from {c.counts}")

    k = input_bit_length(c)
    total = num_sequences(c)
    rank = _rank([int(s) for s in symbols], c.counts, total)
    # Smallest b whose code point reaches this slot
    b = -((-(rank << k)) // total)
    if b >= (1 << k) or (b * total) >> k != rank:
        raise NonCodewordError(f"Sequence at rank {rank} is outside the encoder image")
    return int_to_bits(b, k)


@lru_cache(maxsize=32)
def _codebook(counts: Tuple[int, ...]) -> np.ndarray:
    c = Composition(counts)
    k = input_bit_length(c)
    logger.debug(f"Building CCDM codebook for {counts} ({1 << k} codewords)")
    return np.stack([_encode_index(b, c) for b in range(1 << k)])


def encode_random_blocks(c: Composition, num_blocks: int, rng: np.random.Generator) -> np.ndarray:
    """
    Encode `num_blocks` uniformly random k-bit words.

    Returns:
        Array of shape (num_blocks, n) with amplitude indices
    """
    k = input_bit_length(c)
    if num_blocks <= 0:
        return np.empty((0, c.n), dtype=np.int64)
    bits = rng.integers(0, 2, size=(num_blocks, k), dtype=np.uint8)
    if k <= CODEBOOK_MAX_BITS:
        weights = (1 << np.arange(k - 1, -1, -1)).astype(np.int64)
        indices = bits.astype(np.int64) @ weights if k else np.zeros(num_blocks, dtype=np.int64)
        return _codebook(c.counts)[indices]

    pad = (-k) % 8
    packed = np.packbits(bits, axis=1)
    out = np.empty((num_blocks, c.n), dtype=np.int64)
    for i in range(num_blocks):
        b = int.from_bytes(packed[i].tobytes(), 'big') >> pad
        out[i] = _encode_index(b, c)
    return out


def rate_loss(c: Composition, alphabet: AmplitudeAlphabet) -> float:
    """Entropy of the target PMF minus the realized rate k/n, in bits per amplitude."""
    c.check_alphabet(alphabet)
    return entropy_bits(alphabet) - input_bit_length(c) / c.n


def max_run_length(symbols: Sequence[int]) -> int:
    """Longest run of one value."""
    arr = np.asarray(symbols)
    if arr.size == 0:
        return 0
    boundaries = np.flatnonzero(np.diff(arr)) + 1
    edges = np.concatenate(([0], boundaries, [arr.size]))
    return int(np.max(np.diff(edges)))


def lumped_sequence(c: Composition, blocks: int) -> np.ndarray:
    """All amplitudes of `blocks` blocks sorted into one run per amplitude."""
    return np.repeat(np.arange(c.arity), [count * blocks for count in c.counts])


def compositions_for(alphabet: AmplitudeAlphabet, block_lengths: Sequence[int]) -> List[Composition]:
    return [composition_from_pmf(alphabet, n) for n in block_lengths]
