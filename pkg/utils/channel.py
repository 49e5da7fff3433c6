"""
Transmit DSP and fiber channel.

Waveforms are complex baseband samples normalized so that |A|^2 is the
instantaneous power in W. All filtering is circular (frequency domain), so a
simulation window behaves as one period of a periodic signal; a cyclic guard of
symbols is prepended to every frame and stripped again at the receiver.

Propagation solves, per span,

    dA/dz = -(alpha/2) A - j (beta2/2) d^2A/dt^2 + j gamma_eff (|A_x|^2 + |A_y|^2) A

with gamma_eff = 8/9 gamma for dual-polarization fields (Manakov) and gamma for
single-polarization fields, by the symmetrized split-step Fourier method.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
import scipy.constants as const
from scipy.fft import fft, fftfreq, ifft

from utils.config import GUARD_SYMBOLS, REFERENCE_WAVELENGTH_NM
from utils.logger import log_with_fields
from utils.mapping import QamFrame

logger = logging.getLogger(__name__)

MANAKOV_FACTOR = 8.0 / 9.0


class WdmBandError(ValueError):
    """The WDM comb does not fit into the simulated bandwidth."""


class PropagationError(RuntimeError):
    """Split-step integration produced non-finite samples or gained energy."""


def dbm_to_watt(power_dbm: float) -> float:
    return 10 ** ((power_dbm - 30.0) / 10.0)


def watt_to_dbm(power_w: float) -> float:
    return 10.0 * math.log10(power_w) + 30.0


@dataclass(frozen=True)
class WdmConfig:
    num_channels: int = 5
    spacing_ghz: float = 50.0
    symbol_rate_gbd: float = 32.0
    rolloff: float = 0.1
    oversampling: int = 8
    guard_symbols: int = GUARD_SYMBOLS

    def __post_init__(self):
        if self.num_channels < 1 or self.num_channels % 2 == 0:
            raise ValueError(f"num_channels must be a positive odd number, got {self.num_channels}")
        if self.spacing_ghz <= 0 or self.symbol_rate_gbd <= 0:
            raise ValueError("spacing_ghz and symbol_rate_gbd must be positive")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"rolloff must lie in [0, 1], got {self.rolloff}")
        if self.oversampling < 2:
            raise ValueError(f"oversampling must be at least 2, got {self.oversampling}")
        if self.guard_symbols < 0:
            raise ValueError(f"guard_symbols must be non-negative, got {self.guard_symbols}")
        edge = self.band_edge_hz
        if edge >= self.sample_rate / 2:
            raise WdmBandError(
                f"Outermost channel edge {edge / 1e9:.1f} GHz exceeds the Nyquist "
                f"frequency {self.sample_rate / 2e9:.1f} GHz"
            )

    @property
    def symbol_rate(self) -> float:
        return self.symbol_rate_gbd * 1e9

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.oversampling

    @property
    def channel_bandwidth_hz(self) -> float:
        return self.symbol_rate * (1.0 + self.rolloff)

    @property
    def band_edge_hz(self) -> float:
        return (self.num_channels - 1) / 2 * self.spacing_ghz * 1e9 + self.channel_bandwidth_hz / 2

    @property
    def center_index(self) -> int:
        return (self.num_channels - 1) // 2

    def channel_offsets_hz(self) -> np.ndarray:
        k = np.arange(self.num_channels)
        return (k - (self.num_channels - 1) / 2) * self.spacing_ghz * 1e9


@dataclass(frozen=True)
class FiberLinkConfig:
    span_length_km: float = 80.0
    num_spans: int = 10
    alpha_db_per_km: float = 0.2
    dispersion_ps_nm_km: float = 17.0
    gamma_per_w_km: float = 1.37
    edfa_noise_figure_db: float = 6.0
    launch_power_dbm: float = -0.5
    max_nl_phase_rad: float = 1e-3
    reference_wavelength_nm: float = REFERENCE_WAVELENGTH_NM

    def __post_init__(self):
        if self.span_length_km <= 0:
            raise ValueError(f"span_length_km must be positive, got {self.span_length_km}")
        if self.num_spans < 0:
            raise ValueError(f"num_spans must be non-negative, got {self.num_spans}")
        if self.alpha_db_per_km < 0 or self.gamma_per_w_km < 0 or self.dispersion_ps_nm_km < 0:
            raise ValueError("alpha_db_per_km, dispersion_ps_nm_km and gamma_per_w_km must be non-negative")
        if self.max_nl_phase_rad <= 0 or self.reference_wavelength_nm <= 0:
            raise ValueError("max_nl_phase_rad and reference_wavelength_nm must be positive")

    @property
    def launch_power_w(self) -> float:
        return dbm_to_watt(self.launch_power_dbm)

    @property
    def alpha_per_km(self) -> float:
        """Power attenuation coefficient in 1/km."""
        return self.alpha_db_per_km / (10.0 * math.log10(math.e))

    @property
    def carrier_frequency_hz(self) -> float:
        return const.c / (self.reference_wavelength_nm * 1e-9)

    @property
    def beta2(self) -> float:
        """Group-velocity dispersion in s^2/km (D in ps/nm/km equals s/km^2)."""
        c_kms = const.c / 1e3
        wavelength_km = self.reference_wavelength_nm * 1e-12
        return -self.dispersion_ps_nm_km * wavelength_km ** 2 / (2 * math.pi * c_kms)

    @property
    def span_loss_db(self) -> float:
        return self.alpha_db_per_km * self.span_length_km

    @property
    def total_length_km(self) -> float:
        return self.span_length_km * self.num_spans


@dataclass(frozen=True)
class OpticalField:
    x: np.ndarray
    y: Optional[np.ndarray]
    sample_rate: float
    center_offset: float = 0.0
    # Matched-filter output per unit-energy symbol of the monitored channel
    symbol_gain: float = 1.0

    def __post_init__(self):
        if self.y is not None and self.x.shape != self.y.shape:
            raise ValueError("Both polarizations must have the same number of samples")

    @property
    def dual_polarization(self) -> bool:
        return self.y is not None

    def __len__(self):
        return int(self.x.size)

    def power_w(self) -> float:
        """Mean total power over both polarizations."""
        p = np.mean(np.abs(self.x) ** 2)
        if self.y is not None:
            p += np.mean(np.abs(self.y) ** 2)
        return float(p)

    def energy(self) -> float:
        e = np.sum(np.abs(self.x) ** 2)
        if self.y is not None:
            e += np.sum(np.abs(self.y) ** 2)
        return float(e)

    def peak_power_w(self) -> float:
        p = np.abs(self.x) ** 2
        if self.y is not None:
            p = p + np.abs(self.y) ** 2
        return float(np.max(p))

    def polarizations(self) -> List[np.ndarray]:
        return [self.x] if self.y is None else [self.x, self.y]


def raised_cosine_response(freqs: np.ndarray, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Raised-cosine spectrum with unit passband; folds to 1 at the symbol rate."""
    f = np.abs(freqs)
    low = (1.0 - rolloff) * symbol_rate / 2
    high = (1.0 + rolloff) * symbol_rate / 2
    h = np.zeros_like(f)
    h[f <= low] = 1.0
    if rolloff > 0:
        band = (f > low) & (f <= high)
        h[band] = 0.5 * (1.0 + np.cos(np.pi / (rolloff * symbol_rate) * (f[band] - low)))
    return h


def rrc_response(num_samples: int, sample_rate: float, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine frequency response on the FFT grid."""
    freqs = fftfreq(num_samples, d=1.0 / sample_rate)
    return np.sqrt(raised_cosine_response(freqs, symbol_rate, rolloff))


def add_cyclic_guard(symbols: np.ndarray, guard: int) -> np.ndarray:
    if guard == 0:
        return symbols
    idx = np.arange(-guard, 0) % symbols.size
    return np.concatenate((symbols[idx], symbols))


def rrc_shape(frame: QamFrame, wdm: WdmConfig, power_dbm: float) -> OpticalField:
    """
    Pulse-shape a dual-polarization frame into a single-channel waveform.

    Symbols get a cyclic guard, are upsampled and filtered with a root-raised
    cosine, and the waveform is scaled so that its mean power over both
    polarizations equals the launch power.
    """
    os_ = wdm.oversampling
    sx = add_cyclic_guard(frame.symbols_x, wdm.guard_symbols)
    sy = add_cyclic_guard(frame.symbols_y, wdm.guard_symbols)
    num_samples = sx.size * os_
    h = rrc_response(num_samples, wdm.sample_rate, wdm.symbol_rate, wdm.rolloff)

    energy = 0.5 * (np.mean(np.abs(sx) ** 2) + np.mean(np.abs(sy) ** 2))
    gain = math.sqrt(dbm_to_watt(power_dbm) / 2.0 / energy)

    def shape(symbols: np.ndarray) -> np.ndarray:
        up = np.zeros(num_samples, dtype=complex)
        up[::os_] = symbols
        # os * gain undoes the 1/os of upsampling after matched filtering
        return os_ * gain * ifft(fft(up) * h)

    return OpticalField(x=shape(sx), y=shape(sy), sample_rate=wdm.sample_rate, symbol_gain=gain)


def wdm_mux(
    fields: List[OpticalField],
    spacing_ghz: float,
    channel_bandwidth_hz: Optional[float] = None,
) -> OpticalField:
    """
    Place K channels on a grid centered at zero: f_k = (k - (K-1)/2) * spacing.

    The returned field keeps the symbol gain of the center channel.

    Raises:
        WdmBandError: If the comb plus channel bandwidth exceeds the Nyquist frequency
        ValueError: If the fields differ in sample rate or length
    """
    if not fields:
        raise ValueError("wdm_mux needs at least one channel")
    first = fields[0]
    if any(f.sample_rate != first.sample_rate or len(f) != len(first) for f in fields):
        raise ValueError("All channels must share sample rate and length")

    num = len(fields)
    offsets = (np.arange(num) - (num - 1) / 2) * spacing_ghz * 1e9
    half_band = (channel_bandwidth_hz or 0.0) / 2
    if np.max(np.abs(offsets)) + half_band >= first.sample_rate / 2:
        raise WdmBandError(
            f"WDM comb of {num} channels at {spacing_ghz} GHz exceeds the Nyquist frequency"
        )

    samples = len(first)
    bins = offsets * samples / first.sample_rate
    if not np.allclose(bins, np.round(bins), atol=1e-6):
        logger.warning("WDM channel offsets are not on the FFT grid; the window is not periodic")

    t = np.arange(samples) / first.sample_rate
    dual = first.dual_polarization
    x = np.zeros(samples, dtype=complex)
    y = np.zeros(samples, dtype=complex) if dual else None
    for f_k, fld in zip(offsets, fields):
        carrier = np.exp(2j * np.pi * f_k * t) if f_k else 1.0
        x += fld.x * carrier
        if dual:
            y += fld.y * carrier

    center = fields[(num - 1) // 2]
    return OpticalField(x=x, y=y, sample_rate=first.sample_rate,
                        center_offset=first.center_offset, symbol_gain=center.symbol_gain)


def angular_frequencies(field: OpticalField) -> np.ndarray:
    return 2 * np.pi * (fftfreq(len(field), d=1.0 / field.sample_rate) + field.center_offset)


def linear_operator(omega: np.ndarray, link: FiberLinkConfig, length_km: float) -> np.ndarray:
    """Frequency response of attenuation and dispersion over `length_km`."""
    return np.exp((-link.alpha_per_km / 2 + 0.5j * link.beta2 * omega ** 2) * length_km)


def _effective_length(alpha: float, dz: float) -> float:
    """Length that turns start-of-step power into accumulated nonlinear phase."""
    if alpha == 0.0:
        return dz
    return -math.expm1(-alpha * dz) / alpha


def _step_size(coeff: float, peak_power: float, link: FiberLinkConfig, remaining: float) -> float:
    """
    Step over which coeff * peak_power * L_eff reaches link.max_nl_phase_rad.

    coeff is the nonlinear coefficient applied to the field: gamma for a scalar
    field, 8/9 gamma for a dual-polarization field with peak_power summed over
    both polarizations.
    """
    drive = coeff * peak_power
    if drive <= 0.0:
        return remaining
    alpha = link.alpha_per_km
    if alpha == 0.0:
        return min(link.max_nl_phase_rad / drive, remaining)
    ratio = alpha * link.max_nl_phase_rad / drive
    if ratio >= 1.0:
        return remaining
    return min(-math.log1p(-ratio) / alpha, remaining)


def ssfm_span(
    field: OpticalField,
    link: FiberLinkConfig,
    span_index: int = 0,
    stats: Optional[list] = None,
) -> OpticalField:
    """
    Propagate one span with the symmetrized split-step Fourier method.

    The step size is chosen from the current peak power so that the nonlinear
    phase accumulated per step stays below link.max_nl_phase_rad. Consecutive
    linear half-steps are merged into one frequency-domain multiplication. The
    nonlinear operator is applied at mid-step with the loss-corrected length
    2 sinh(alpha dz / 2) / alpha, exact for a pure Kerr medium with loss.

    Raises:
        PropagationError: On non-finite samples or an energy increase
    """
    length = link.span_length_km
    alpha = link.alpha_per_km
    coeff = link.gamma_per_w_km * (MANAKOV_FACTOR if field.dual_polarization else 1.0)
    omega = angular_frequencies(field)
    energy_in = field.energy()
    pols = [p.copy() for p in field.polarizations()]

    def apply_linear(dz: float) -> None:
        op = linear_operator(omega, link, dz)
        for i, p in enumerate(pols):
            pols[i] = ifft(fft(p) * op)

    def total_power() -> np.ndarray:
        power = np.abs(pols[0]) ** 2
        for p in pols[1:]:
            power = power + np.abs(p) ** 2
        return power

    peak = field.peak_power_w()
    dz = _step_size(coeff, peak, link, length)
    apply_linear(dz / 2)
    z = 0.0
    steps = 0
    max_peak = peak
    while True:
        power = total_power()
        if coeff > 0.0:
            if alpha > 0.0:
                l_mid = 2.0 * math.sinh(alpha * dz / 2) / alpha
            else:
                l_mid = dz
            rotation = np.exp(1j * coeff * l_mid * power)
            for i in range(len(pols)):
                pols[i] = pols[i] * rotation
        z += dz
        steps += 1
        peak = float(np.max(power)) if power.size else 0.0
        max_peak = max(max_peak, peak)
        if not np.isfinite(peak):
            raise PropagationError(
                f"Non-finite field in span {span_index} at z={z:.3f} km after {steps} steps"
            )

        remaining = length - z
        if remaining <= 1e-12 * length:
            apply_linear(dz / 2)
            break
        # Power at mid-step; loss over the next half-step only lowers it
        dz_next = _step_size(coeff, peak, link, remaining)
        apply_linear(dz / 2 + dz_next / 2)
        dz = dz_next

    out = replace(field, x=pols[0], y=pols[1] if field.dual_polarization else None)
    energy_out = out.energy()
    expected = energy_in * math.exp(-alpha * length)
    if not math.isfinite(energy_out) or energy_out > expected * (1 + 1e-6) + 1e-300:
        raise PropagationError(
            f"Energy not conserved in span {span_index}: in={energy_in:.6e}, out={energy_out:.6e}, "
            f"expected={expected:.6e}, steps={steps}"
        )

    if stats is not None:
        stats.append({'span': span_index, 'steps': steps, 'peak_power_w': max_peak})
    log_with_fields(logger, logging.DEBUG, "Span propagated",
                    span=span_index, steps=steps, peak_mw=round(max_peak * 1e3, 4))
    return out


def edfa(
    field: OpticalField,
    gain_db: float,
    noise_figure_db: float,
    rng: np.random.Generator,
    carrier_frequency_hz: Optional[float] = None,
) -> OpticalField:
    """
    Amplify by gain_db and add circular white Gaussian ASE to each polarization.

    ASE power spectral density per polarization is (G - 1) h nu n_sp with
    n_sp = 10^(NF/10) / 2, so each complex sample gets variance PSD * sample_rate.
    """
    g = 10 ** (gain_db / 10.0)
    n_sp = 10 ** (noise_figure_db / 10.0) / 2.0
    nu = carrier_frequency_hz or const.c / (REFERENCE_WAVELENGTH_NM * 1e-9)
    psd = max(g - 1.0, 0.0) * const.h * nu * n_sp
    variance = psd * field.sample_rate

    amplified = []
    for p in field.polarizations():
        out = p * math.sqrt(g)
        if variance > 0.0:
            sigma = math.sqrt(variance / 2.0)
            out = out + sigma * (rng.standard_normal(p.size) + 1j * rng.standard_normal(p.size))
        amplified.append(out)
    return replace(field, x=amplified[0], y=amplified[1] if field.dual_polarization else None)


def propagate_link(
    field: OpticalField,
    link: FiberLinkConfig,
    wdm: WdmConfig,
    rng: np.random.Generator,
    stats: Optional[list] = None,
) -> OpticalField:
    """Each span: SSFM propagation, then an EDFA whose gain equals the span loss."""
    for span in range(link.num_spans):
        field = ssfm_span(field, link, span_index=span, stats=stats)
        field = edfa(field, link.span_loss_db, link.edfa_noise_figure_db, rng,
                     carrier_frequency_hz=link.carrier_frequency_hz)
    return field


def ase_noise_variance(link: FiberLinkConfig, bandwidth_hz: float) -> float:
    """Accumulated ASE power per polarization in `bandwidth_hz` after all spans."""
    g = 10 ** (link.span_loss_db / 10.0)
    n_sp = 10 ** (link.edfa_noise_figure_db / 10.0) / 2.0
    psd = (g - 1.0) * const.h * link.carrier_frequency_hz * n_sp
    return link.num_spans * psd * bandwidth_hz


def analytic_ase_snr_db(link: FiberLinkConfig, wdm: WdmConfig) -> float:
    """
    ASE-limited SNR after matched filtering.

    The matched root-raised-cosine filter passes noise in an equivalent
    bandwidth equal to the symbol rate; the signal power per polarization is
    half the launch power.
    """
    noise = ase_noise_variance(link, wdm.symbol_rate)
    if noise == 0.0:
        return math.inf
    return 10 * math.log10(link.launch_power_w / 2.0 / noise)
