"""
Self-checks of the channel model against closed-form limits.

Each check returns a CheckResult; the CLI prints one PASS/FAIL line per check
and exits non-zero when any check fails.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy.fft import fft, ifft

from utils.channel import (
    FiberLinkConfig,
    OpticalField,
    WdmConfig,
    analytic_ase_snr_db,
    angular_frequencies,
    dbm_to_watt,
    linear_operator,
    propagate_link,
    rrc_shape,
    ssfm_span,
)
from utils.mapping import build_frame
from utils.receiver import effective_snr_dual, rx_frontend
from utils.shaping import AmplitudeAlphabet

logger = logging.getLogger(__name__)

VALIDATION_PMF = (0.4, 0.3, 0.2, 0.1)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ''

    def line(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return f"{status} {self.name}: {self.detail} (value={self.value:.3e}, tol={self.tolerance:.1e})"


def _random_field(rng: np.random.Generator, samples: int, power_w: float, dual: bool) -> OpticalField:
    def pol():
        return rng.standard_normal(samples) + 1j * rng.standard_normal(samples)

    scale = math.sqrt(power_w / (4.0 if dual else 2.0))
    return OpticalField(
        x=scale * pol(),
        y=scale * pol() if dual else None,
        sample_rate=256e9,
    )


def _relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


def check_linear_limit(seed: int = 0) -> CheckResult:
    """With gamma = 0 one span equals a single application of the linear operator."""
    link = FiberLinkConfig(gamma_per_w_km=0.0)
    field = _random_field(np.random.default_rng(seed), 4096, 1e-3, dual=True)
    out = ssfm_span(field, link)
    op = linear_operator(angular_frequencies(field), link, link.span_length_km)
    err = max(
        _relative_error(out.x, ifft(fft(field.x) * op)),
        _relative_error(out.y, ifft(fft(field.y) * op)),
    )
    tol = 1e-9
    return CheckResult('linear_limit', err < tol, err, tol, "gamma=0 span vs exact dispersion and loss")


def check_spm_limit(seed: int = 0) -> CheckResult:
    """With alpha = D = 0 a single-polarization field acquires phase gamma |A|^2 L."""
    link = FiberLinkConfig(alpha_db_per_km=0.0, dispersion_ps_nm_km=0.0, span_length_km=10.0)
    field = _random_field(np.random.default_rng(seed), 4096, 1e-3, dual=False)
    out = ssfm_span(field, link)
    expected = field.x * np.exp(1j * link.gamma_per_w_km * np.abs(field.x) ** 2 * link.span_length_km)
    err = _relative_error(out.x, expected)
    tol = 1e-6
    return CheckResult('spm_limit', err < tol, err, tol, "dispersion-free lossless span vs SPM phase")


def check_energy_conservation(seed: int = 0) -> CheckResult:
    """Kerr and dispersion are lossless; only fiber attenuation removes energy."""
    link = FiberLinkConfig()
    field = _random_field(np.random.default_rng(seed), 8192, dbm_to_watt(6.0), dual=True)
    out = ssfm_span(field, link)
    expected = field.energy() * math.exp(-link.alpha_per_km * link.span_length_km)
    err = abs(out.energy() - expected) / expected
    tol = 1e-6
    return CheckResult('energy_conservation', err < tol, err, tol, "span output energy vs e^(-alpha L)")


def check_back_to_back(seed: int = 0) -> CheckResult:
    """Pulse shaping followed by the receiver front-end returns the transmitted symbols."""
    wdm = WdmConfig(num_channels=1)
    link = FiberLinkConfig(num_spans=0)
    frame = build_frame(AmplitudeAlphabet.ask(VALIDATION_PMF), 10, 'intra', 4096, False, seed=seed)
    rx = rrc_shape(frame, wdm, link.launch_power_dbm)
    y_x, y_y = rx_frontend(rx, wdm, link)
    err = max(float(np.max(np.abs(y_x - frame.symbols_x))), float(np.max(np.abs(y_y - frame.symbols_y))))
    tol = 1e-6
    return CheckResult('back_to_back', err < tol, err, tol, "matched-filter output vs transmitted symbols")


def check_ase_snr(seed: int = 0, symbols: int = 2 ** 15) -> CheckResult:
    """
    With gamma = 0 the measured SNR is set by ASE alone.

    The genie coefficient minimizes the error variance, which adds exactly one
    to the linear SNR; the comparison includes that offset.
    """
    wdm = WdmConfig(num_channels=1)
    link = FiberLinkConfig(gamma_per_w_km=0.0)
    frame = build_frame(AmplitudeAlphabet.ask(VALIDATION_PMF), 10, 'intra', symbols, False, seed=seed)
    tx = rrc_shape(frame, wdm, link.launch_power_dbm)
    rx = propagate_link(tx, link, wdm, np.random.default_rng(seed))
    y_x, y_y = rx_frontend(rx, wdm, link)
    measured = effective_snr_dual(y_x, y_y, frame.symbols_x, frame.symbols_y)
    analytic = analytic_ase_snr_db(link, wdm)
    expected = 10 * math.log10(10 ** (analytic / 10) + 1)
    err = abs(measured - expected)
    tol = 0.1
    return CheckResult('ase_snr', err < tol, err, tol,
                       f"measured {measured:.3f} dB vs analytic {expected:.3f} dB")


CHECKS: List[Callable[..., CheckResult]] = [
    check_linear_limit,
    check_spm_limit,
    check_energy_conservation,
    check_back_to_back,
    check_ase_snr,
]


def run_checks(seed: int = 0) -> List[CheckResult]:
    results = []
    for check in CHECKS:
        result = check(seed=seed)
        (logger.info if result.passed else logger.error)(result.line())
        results.append(result)
    return results
