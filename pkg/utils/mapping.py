"""
PAS symbol generation: pair shaped amplitudes into QAM payloads, prefix uniform
sign bits, normalize the square constellation and optionally interleave each FEC
block.

Point labels: a one-sided amplitude index i with sign s maps to the PAM level
index u = m + i for s = +1 and u = m - 1 - i for s = -1 (m = arity), so levels
run from the most negative to the most positive amplitude. A QAM point label is
u_I * 2m + u_Q.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from utils.config import FEC_BLOCK_SYMBOLS
from utils.shaping import (
    AmplitudeAlphabet,
    AmplitudeSequence,
    Composition,
    composition_from_pmf,
    encode_random_blocks,
)

logger = logging.getLogger(__name__)

PAIRING_MODES = ('intra', 'inter', 'uniform')


class PairingError(ValueError):
    """Amplitude streams cannot be paired as requested."""


@dataclass(frozen=True)
class QamConstellation:
    alphabet: AmplitudeAlphabet
    points: np.ndarray
    scale: float
    expected_pmf: np.ndarray
    levels: np.ndarray

    @property
    def side(self) -> int:
        """Number of PAM levels per dimension."""
        return int(self.levels.size)

    @classmethod
    def from_alphabet(cls, alphabet: AmplitudeAlphabet) -> 'QamConstellation':
        amps = np.asarray(alphabet.amplitudes)
        pmf = np.asarray(alphabet.target_pmf)
        levels = np.concatenate((-amps[::-1], amps))
        level_pmf = np.concatenate((pmf[::-1], pmf)) / 2.0
        # Unit average energy under the target PMF, both dimensions
        energy = 2.0 * float(np.sum(pmf * amps ** 2))
        scale = 1.0 / np.sqrt(energy)
        points = scale * (levels[:, None] + 1j * levels[None, :]).ravel()
        return cls(
            alphabet=alphabet,
            points=points,
            scale=float(scale),
            expected_pmf=np.outer(level_pmf, level_pmf).ravel(),
            levels=levels,
        )

    def labels_of(self, symbols: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """
        Point labels of on-grid symbols.

        Raises:
            ValueError: If a symbol is farther than `tol` (unscaled) from every point
        """
        unscaled = np.asarray(symbols) / self.scale
        u = _nearest_level(self.levels, unscaled.real)
        v = _nearest_level(self.levels, unscaled.imag)
        err = np.abs(unscaled - (self.levels[u] + 1j * self.levels[v]))
        if err.size and float(np.max(err)) > tol:
            bad = int(np.argmax(err))
            raise ValueError(f"Symbol {symbols[bad]!r} at position {bad} is not on the constellation grid")
        return u * self.side + v


def _nearest_level(levels: np.ndarray, values: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(levels, values), 1, levels.size - 1)
    left = levels[idx - 1]
    right = levels[idx]
    return np.where(np.abs(values - left) <= np.abs(values - right), idx - 1, idx)


@dataclass(frozen=True)
class PairedAmplitudes:
    pairs: np.ndarray  # shape (num_pairs, 2): (a_I index, a_Q index)

    def __len__(self):
        return int(self.pairs.shape[0])


@dataclass(frozen=True)
class QamFrame:
    symbols_x: np.ndarray
    symbols_y: np.ndarray
    labels_x: np.ndarray
    labels_y: np.ndarray
    block_length_n: int
    pairing_mode: str
    interleaved: bool = False
    interleaver_seed: Optional[int] = None
    fec_block_len: int = FEC_BLOCK_SYMBOLS
    seed: Optional[int] = None
    truncated_amplitudes: int = 0
    # per-polarization amplitude-index pairs, kept for composition checks
    pairs_x: Optional[np.ndarray] = field(default=None, repr=False)
    pairs_y: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.symbols_x.shape != self.symbols_y.shape:
            raise ValueError("Both polarizations must carry the same number of symbols")
        if self.interleaved and len(self) % self.fec_block_len:
            raise ValueError(
                f"Interleaved frame length {len(self)} is not a multiple of fec_block_len {self.fec_block_len}"
            )

    def __len__(self):
        return int(self.symbols_x.size)


def pair_intra(seq: AmplitudeSequence) -> PairedAmplitudes:
    """Pair adjacent amplitudes: first with second, third with fourth, ..."""
    symbols = np.asarray(seq.symbols)
    if symbols.size % 2:
        raise PairingError(f"Intra-DM pairing needs an even number of amplitudes, got {symbols.size}")
    return PairedAmplitudes(symbols.reshape(-1, 2))


def pair_inter(seq_a: AmplitudeSequence, seq_b: AmplitudeSequence) -> PairedAmplitudes:
    """Pair position i of one DM output with position i of another."""
    a = np.asarray(seq_a.symbols)
    b = np.asarray(seq_b.symbols)
    if a.size != b.size:
        raise PairingError(f"Inter-DM pairing needs equal lengths, got {a.size} and {b.size}")
    return PairedAmplitudes(np.stack((a, b), axis=1))


def qam_point_labels(pairs: PairedAmplitudes, sign_bits: np.ndarray, constellation: QamConstellation) -> np.ndarray:
    """Point labels for amplitude pairs with I-before-Q sign bits (0 -> +, 1 -> -)."""
    sign_bits = np.asarray(sign_bits)
    needed = 2 * len(pairs)
    if sign_bits.size < needed:
        raise PairingError(f"Need {needed} sign bits for {len(pairs)} pairs, got {sign_bits.size}")
    m = constellation.alphabet.arity
    signs = sign_bits[:needed].reshape(-1, 2)
    # PAM level index per dimension
    u = np.where(signs == 0, m + pairs.pairs, m - 1 - pairs.pairs)
    return u[:, 0] * constellation.side + u[:, 1]


def map_pas(pairs: PairedAmplitudes, sign_bits: np.ndarray, constellation: QamConstellation) -> np.ndarray:
    """
    Complex symbols scale * (s_I * a_I + j * s_Q * a_Q).

    Raises:
        PairingError: If fewer than two sign bits per pair are supplied
    """
    return constellation.points[qam_point_labels(pairs, sign_bits, constellation)]


def expected_qam_pmf(alphabet: AmplitudeAlphabet) -> np.ndarray:
    """Cartesian-product PMF over all (2 * arity)^2 points, label order."""
    return QamConstellation.from_alphabet(alphabet).expected_pmf


def per_quadrant_pmf(pmf: np.ndarray, arity: int) -> np.ndarray:
    """
    Fold a full-constellation PMF onto the |I| x |Q| amplitude grid.

    Entry [i, j] is the probability of amplitude index i on I and j on Q
    summed over the four quadrants, so the matrix sums to 1.
    """
    side = 2 * arity
    full = np.asarray(pmf).reshape(side, side)
    folded = np.zeros((arity, arity))
    for u in range(side):
        i = u - arity if u >= arity else arity - 1 - u
        for v in range(side):
            j = v - arity if v >= arity else arity - 1 - v
            folded[i, j] += full[u, v]
    return folded


def pair_pmf(c: Composition, pairing_mode: str) -> np.ndarray:
    """
    Joint distribution of (a_I, a_Q) amplitude indices when every arrangement
    of composition c is equally likely.

    Intra pairing draws both amplitudes from the same block without replacement;
    inter pairing draws them from two independent blocks.
    """
    counts = np.asarray(c.counts, dtype=float)
    n = c.n
    if pairing_mode == 'intra':
        joint = np.outer(counts, counts) - np.diag(counts)
        return joint / (n * (n - 1))
    if pairing_mode == 'inter':
        return np.outer(counts, counts) / n ** 2
    raise PairingError(f"No composition-level pair distribution for mode {pairing_mode!r}")


def _block_permutation(seed: int, pol: int, block_index: int, size: int) -> np.ndarray:
    bitgen = np.random.Philox(np.random.SeedSequence([seed, pol, block_index]))
    return np.random.Generator(bitgen).permutation(size)


def _permute_blocks(stream: np.ndarray, seed: int, pol: int, block_len: int, inverse: bool) -> np.ndarray:
    out = np.empty_like(stream)
    for b in range(stream.size // block_len):
        sl = slice(b * block_len, (b + 1) * block_len)
        perm = _block_permutation(seed, pol, b, block_len)
        if inverse:
            out[sl][perm] = stream[sl]
        else:
            out[sl] = stream[sl][perm]
    return out


def _check_fec_multiple(frame: QamFrame) -> None:
    if len(frame) % frame.fec_block_len:
        raise ValueError(
            f"Frame length {len(frame)} is not a multiple of fec_block_len {frame.fec_block_len}"
        )


def interleave(frame: QamFrame, seed: int) -> QamFrame:
    """
    Shuffle the symbols inside each FEC block with an independent uniform permutation.

    Permutations come from a Philox generator keyed on (seed, polarization,
    block index), so any block can be regenerated on its own.
    """
    _check_fec_multiple(frame)
    L = frame.fec_block_len
    return replace(
        frame,
        symbols_x=_permute_blocks(frame.symbols_x, seed, 0, L, inverse=False),
        symbols_y=_permute_blocks(frame.symbols_y, seed, 1, L, inverse=False),
        labels_x=_permute_blocks(frame.labels_x, seed, 0, L, inverse=False),
        labels_y=_permute_blocks(frame.labels_y, seed, 1, L, inverse=False),
        interleaved=True,
        interleaver_seed=seed,
    )


def deinterleave(frame: QamFrame, seed: int) -> QamFrame:
    """Inverse of interleave for the same seed."""
    _check_fec_multiple(frame)
    L = frame.fec_block_len
    return replace(
        frame,
        symbols_x=_permute_blocks(frame.symbols_x, seed, 0, L, inverse=True),
        symbols_y=_permute_blocks(frame.symbols_y, seed, 1, L, inverse=True),
        labels_x=_permute_blocks(frame.labels_x, seed, 0, L, inverse=True),
        labels_y=_permute_blocks(frame.labels_y, seed, 1, L, inverse=True),
        interleaved=False,
        interleaver_seed=None,
    )


def _polarization_pairs(
    alphabet: AmplitudeAlphabet,
    n: int,
    pairing_mode: str,
    total_symbols: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, int]:
    """Amplitude pairs for one polarization plus the number of amplitudes cut from the last block."""
    if pairing_mode == 'uniform':
        pairs = rng.integers(0, alphabet.arity, size=(total_symbols, 2))
        return pairs, 0

    c = composition_from_pmf(alphabet, n)
    if pairing_mode == 'intra':
        per_block = n // 2
        num_blocks = -(-total_symbols // per_block)
        blocks = encode_random_blocks(c, num_blocks, rng)
        pairs = pair_intra(AmplitudeSequence(blocks.ravel())).pairs
    else:
        num_pairs = -(-total_symbols // n)
        blocks = encode_random_blocks(c, 2 * num_pairs, rng)
        # DM outputs 2t and 2t+1 are stacked and read column-wise
        stacked = blocks.reshape(num_pairs, 2, n)
        pairs = np.stack((stacked[:, 0, :].ravel(), stacked[:, 1, :].ravel()), axis=1)
    cut = pairs.shape[0] - total_symbols
    return pairs[:total_symbols], 2 * cut


def build_frame(
    alphabet: AmplitudeAlphabet,
    n: int,
    pairing_mode: str,
    total_symbols: int,
    interleave_flag: bool,
    seed: int,
    fec_block_len: int = FEC_BLOCK_SYMBOLS,
) -> QamFrame:
    """
    Generate a dual-polarization shaped QAM frame.

    Each polarization has its own DM chain fed by independent random data.
    If the requested symbol count does not consume a whole number of DM blocks,
    the last block is encoded in full and cut; the number of dropped amplitudes
    is recorded on the frame.

    Args:
        alphabet: One-sided amplitude alphabet with target PMF
        n: DM block length (even for intra pairing; ignored for uniform)
        pairing_mode: 'intra', 'inter' or 'uniform'
        total_symbols: QAM symbols per polarization
        interleave_flag: Shuffle symbols within each FEC block
        seed: Seed for data, sign bits and interleaver
        fec_block_len: Symbols per FEC block

    Returns:
        QamFrame with symbols, point labels and generation metadata

    Raises:
        PairingError: On an unknown mode or odd n with intra pairing
        ValueError: On sizes incompatible with interleaving
    """
    if pairing_mode not in PAIRING_MODES:
        raise PairingError(f"Unknown pairing mode {pairing_mode!r}; expected one of {PAIRING_MODES}")
    if total_symbols <= 0:
        raise ValueError(f"total_symbols must be positive, got {total_symbols}")
    if pairing_mode == 'intra' and n % 2:
        raise PairingError(f"Intra-DM pairing needs an even block length, got n={n}")
    if interleave_flag and total_symbols % fec_block_len:
        raise ValueError(
            f"total_symbols {total_symbols} is not a multiple of fec_block_len {fec_block_len}"
        )

    constellation = QamConstellation.from_alphabet(alphabet)
    data_x, data_y, signs_ss, interleave_ss = np.random.SeedSequence(seed).spawn(4)
    pairs_x, cut = _polarization_pairs(alphabet, n, pairing_mode, total_symbols, np.random.default_rng(data_x))
    pairs_y, _ = _polarization_pairs(alphabet, n, pairing_mode, total_symbols, np.random.default_rng(data_y))

    sign_rng = np.random.default_rng(signs_ss)
    sign_bits = sign_rng.integers(0, 2, size=(2, 2 * total_symbols), dtype=np.uint8)
    labels_x = qam_point_labels(PairedAmplitudes(pairs_x), sign_bits[0], constellation)
    labels_y = qam_point_labels(PairedAmplitudes(pairs_y), sign_bits[1], constellation)

    frame = QamFrame(
        symbols_x=constellation.points[labels_x],
        symbols_y=constellation.points[labels_y],
        labels_x=labels_x,
        labels_y=labels_y,
        block_length_n=n,
        pairing_mode=pairing_mode,
        fec_block_len=fec_block_len,
        seed=seed,
        truncated_amplitudes=cut,
        pairs_x=pairs_x,
        pairs_y=pairs_y,
    )
    logger.debug(
        f"Built {pairing_mode} frame: n={n}, symbols={total_symbols}, seed={seed}, cut={cut}"
    )

    if interleave_flag:
        frame = interleave(frame, int(interleave_ss.generate_state(1)[0]))
    return frame
