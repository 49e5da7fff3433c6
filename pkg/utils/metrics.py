"""
Sequence statistics for shaped QAM streams: empirical PMF, KL divergence,
2D kurtosis and run ratios (value, magnitude and phase).
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import Dict, Optional

import numpy as np
from scipy.special import rel_entr

from utils.mapping import QamConstellation, QamFrame, per_quadrant_pmf

logger = logging.getLogger(__name__)

EQUALITY_TOL = 1e-9


class OffGridSymbolError(ValueError):
    """A symbol does not coincide with any constellation point."""


@dataclass(frozen=True)
class MetricsReport:
    kl_divergence: float
    kurtosis_2d: float
    run_ratio: float
    run_ratio_abs: float
    run_ratio_arg: float
    n_sim: int
    n: Optional[int] = None
    pairing_mode: Optional[str] = None
    interleaved: Optional[bool] = None

    @property
    def kl_infinite(self) -> bool:
        return math.isinf(self.kl_divergence)

    def to_dict(self) -> Dict:
        return asdict(self)


def _labels(symbols: np.ndarray, constellation: QamConstellation) -> np.ndarray:
    try:
        return constellation.labels_of(symbols, tol=EQUALITY_TOL)
    except ValueError as e:
        raise OffGridSymbolError(str(e)) from e


def empirical_pmf(symbols: np.ndarray, constellation: QamConstellation) -> np.ndarray:
    """
    Relative frequency of every constellation point, in label order.

    Raises:
        OffGridSymbolError: If a symbol is off the grid by more than 1e-9 after unscaling
        ValueError: If the stream is empty
    """
    symbols = np.asarray(symbols)
    if symbols.size == 0:
        raise ValueError("Cannot build an empirical PMF from an empty stream")
    labels = _labels(symbols, constellation)
    counts = np.bincount(labels, minlength=constellation.points.size)
    return counts / symbols.size


def kl_divergence_from_pmf(expected: np.ndarray, empirical: np.ndarray) -> float:
    """D(expected || empirical) in bits; math.inf if the empirical PMF misses a point."""
    expected = np.asarray(expected, dtype=float)
    empirical = np.asarray(empirical, dtype=float)
    # rel_entr is inf where expected > 0 and empirical == 0
    return float(np.sum(rel_entr(expected, empirical))) / math.log(2)


def kl_divergence(expected: np.ndarray, symbols: np.ndarray, constellation: QamConstellation) -> float:
    """
    KL divergence between the expected QAM PMF and the empirical PMF of `symbols`.

    The expected distribution is the first argument of the divergence. A point
    with positive expected probability that never occurs yields math.inf; this
    is a finite-sample outcome and is reported rather than raised.
    """
    return kl_divergence_from_pmf(expected, empirical_pmf(symbols, constellation))


def kurtosis_2d(symbols: np.ndarray) -> float:
    """
    Standardized fourth moment E|X - mu|^4 / (E|X - mu|^2)^2.

    Raises:
        ValueError: If the stream is constant (or empty)
    """
    x = np.asarray(symbols, dtype=complex)
    if x.size < 2:
        raise ValueError("Kurtosis needs at least two symbols")
    d2 = np.abs(x - x.mean()) ** 2
    m2 = float(np.mean(d2))
    if m2 == 0.0:
        raise ValueError("Kurtosis is undefined for a constant stream")
    return float(np.mean(d2 ** 2)) / m2 ** 2


def _run_ratio_from_changes(changes: np.ndarray, length: int) -> float:
    return (1 + int(np.count_nonzero(changes))) / length


def _require_nonempty(x: np.ndarray) -> None:
    if x.size == 0:
        raise ValueError("Run ratio is undefined for an empty stream")


def run_ratio(symbols) -> float:
    """Number of maximal runs of equal values divided by the sequence length."""
    x = np.asarray(symbols)
    _require_nonempty(x)
    return _run_ratio_from_changes(x[1:] != x[:-1], x.size)


def run_ratio_abs(symbols, tol: float = EQUALITY_TOL) -> float:
    """Run ratio of the magnitudes |x_i|."""
    x = np.asarray(symbols)
    _require_nonempty(x)
    mag = np.abs(x)
    return _run_ratio_from_changes(np.abs(np.diff(mag)) > tol, x.size)


def run_ratio_arg(symbols, tol: float = EQUALITY_TOL) -> float:
    """
    Run ratio of the phases arg(x_i).

    Raises:
        ValueError: If the stream is empty or contains a zero symbol
    """
    x = np.asarray(symbols, dtype=complex)
    _require_nonempty(x)
    if np.any(x == 0):
        raise ValueError("Phase run ratio is undefined for a zero symbol")
    # Angle of x_i * conj(x_{i-1}) avoids the -pi/+pi branch cut
    step = np.angle(x[1:] * np.conj(x[:-1]))
    return _run_ratio_from_changes(np.abs(step) > tol, x.size)


def _label_run_ratios(labels: np.ndarray, constellation: QamConstellation) -> Dict[str, float]:
    """Run ratios on exact integer labels; magnitude and phase compare via the unscaled grid."""
    side = constellation.side
    u, v = np.divmod(labels, side)
    re = constellation.levels[u]
    im = constellation.levels[v]
    energy = re ** 2 + im ** 2
    return {
        'run_ratio': run_ratio(labels),
        'run_ratio_abs': _run_ratio_from_changes(np.diff(energy) != 0, labels.size),
        'run_ratio_arg': run_ratio_arg(re + 1j * im),
    }


def frame_metrics(frame: QamFrame, constellation: QamConstellation) -> MetricsReport:
    """
    All sequence metrics of a transmit frame.

    KL divergence and kurtosis are computed over both polarizations jointly;
    run ratios per polarization and then averaged.
    """
    both = np.concatenate((frame.symbols_x, frame.symbols_y))
    labels = np.concatenate((frame.labels_x, frame.labels_y))
    counts = np.bincount(labels, minlength=constellation.points.size)
    kl = kl_divergence_from_pmf(constellation.expected_pmf, counts / labels.size)

    per_pol = [_label_run_ratios(lab, constellation) for lab in (frame.labels_x, frame.labels_y)]
    ratios = {key: 0.5 * (per_pol[0][key] + per_pol[1][key]) for key in per_pol[0]}

    return MetricsReport(
        kl_divergence=kl,
        kurtosis_2d=kurtosis_2d(both),
        n_sim=len(frame),
        n=frame.block_length_n,
        pairing_mode=frame.pairing_mode,
        interleaved=frame.interleaved,
        **ratios,
    )


def stream_metrics(symbols_x: np.ndarray, symbols_y: np.ndarray, constellation: QamConstellation) -> MetricsReport:
    """Metrics for externally produced symbol streams (e.g. read from a symbol file)."""
    labels_x = _labels(symbols_x, constellation)
    labels_y = _labels(symbols_y, constellation)
    frame = QamFrame(
        symbols_x=np.asarray(symbols_x),
        symbols_y=np.asarray(symbols_y),
        labels_x=labels_x,
        labels_y=labels_y,
        block_length_n=0,
        pairing_mode='external',
    )
    return frame_metrics(frame, constellation)


def empirical_pair_matrix(frame: QamFrame, constellation: QamConstellation) -> np.ndarray:
    """Per-quadrant empirical PMF (|I| amplitude x |Q| amplitude) over both polarizations."""
    labels = np.concatenate((frame.labels_x, frame.labels_y))
    pmf = np.bincount(labels, minlength=constellation.points.size) / labels.size
    return per_quadrant_pmf(pmf, constellation.alphabet.arity)
