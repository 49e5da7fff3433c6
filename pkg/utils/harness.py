"""
Experiment orchestration: config ingestion, block-length sweeps over pairing
and interleaving, seeded Monte-Carlo runs, confidence intervals and CSV output.
"""

import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import toml

from utils.channel import (
    FiberLinkConfig,
    PropagationError,
    WdmConfig,
    propagate_link,
    rrc_shape,
    wdm_mux,
)
from utils.config import FEC_BLOCK_SYMBOLS
from utils.logger import log_with_fields
from utils.mapping import PAIRING_MODES, QamConstellation, build_frame
from utils.metrics import frame_metrics
from utils.receiver import effective_snr_dual, rx_frontend
from utils.shaping import AmplitudeAlphabet, composition_from_pmf, rate_loss
from utils.symbol_io import write_field_file

logger = logging.getLogger(__name__)

DEFAULT_PMF = (0.4, 0.3, 0.2, 0.1)
DEFAULT_BLOCK_LENGTHS = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)
CI_Z = 1.959964

CSV_COLUMNS = [
    'n', 'pairing', 'interleaved', 'run', 'snr_db', 'kl_bits', 'kurtosis',
    'run_ratio', 'run_ratio_abs', 'run_ratio_arg', 'ci_low_db', 'ci_high_db',
    'seed', 'wall_s', 'aggregate', 'status',
]
METRIC_COLUMNS = ['snr_db', 'kl_bits', 'kurtosis', 'run_ratio', 'run_ratio_abs', 'run_ratio_arg']
INTEGER_COLUMNS = ['n', 'run', 'seed', 'aggregate']
COORDINATES = ['pairing', 'interleaved', 'n']
SCALES = ('desk', 'paper', 'full')

ProgressSink = Callable[[int, int, Dict[str, Any]], None]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def default_alphabet() -> AmplitudeAlphabet:
    return AmplitudeAlphabet.ask(DEFAULT_PMF)


@dataclass(frozen=True)
class ExperimentConfig:
    wdm: WdmConfig = field(default_factory=WdmConfig)
    link: FiberLinkConfig = field(default_factory=FiberLinkConfig)
    alphabet: AmplitudeAlphabet = field(default_factory=default_alphabet)
    block_lengths: Tuple[int, ...] = DEFAULT_BLOCK_LENGTHS
    pairing_modes: Tuple[str, ...] = ('intra', 'inter')
    interleave: Tuple[bool, ...] = (False, True)
    symbols_per_run: int = 500_000
    num_runs: int = 10
    base_seed: int = 0
    output: str = 'results/sweep.csv'
    fec_block_len: int = FEC_BLOCK_SYMBOLS
    workers: int = 1
    record_wall_time: bool = False
    field_dump_dir: Optional[str] = None

    def __post_init__(self):
        if self.num_runs < 1:
            raise ConfigError('experiment.runs', f"must be at least 1, got {self.num_runs}")
        if self.symbols_per_run < self.fec_block_len:
            raise ConfigError(
                'experiment.symbols_per_run',
                f"must hold at least one FEC block of {self.fec_block_len} symbols",
            )
        if self.base_seed < 0:
            raise ConfigError('experiment.seed', "must be non-negative")
        if self.workers < 1:
            raise ConfigError('experiment.workers', "must be at least 1")
        for mode in self.pairing_modes:
            if mode not in PAIRING_MODES:
                raise ConfigError('shaping.pairing_modes', f"unknown mode {mode!r}")
        for n in self.block_lengths:
            if n < self.alphabet.arity:
                raise ConfigError('shaping.block_lengths', f"n={n} is shorter than the alphabet")
            if 'intra' in self.pairing_modes and n % 2:
                raise ConfigError('shaping.block_lengths', f"n={n} must be even for intra pairing")

    @property
    def frame_symbols(self) -> int:
        """Symbols per run, floored to a whole number of FEC blocks."""
        return (self.symbols_per_run // self.fec_block_len) * self.fec_block_len


@dataclass(frozen=True)
class SweepPoint:
    n: int
    pairing: str
    interleaved: bool
    run: int
    seed: int


def _integer_columns(df: pd.DataFrame) -> pd.DataFrame:
    # Cast before concat; a float64 detour would round 63-bit seeds
    df = df.copy()
    for col in INTEGER_COLUMNS:
        df[col] = pd.to_numeric(df[col]).astype('Int64')
    return df


@dataclass
class SweepResult:
    rows: pd.DataFrame
    aggregates: pd.DataFrame

    def combined(self) -> pd.DataFrame:
        frames = [_integer_columns(df) for df in (self.rows, self.aggregates) if not df.empty]
        if not frames:
            return pd.DataFrame(columns=CSV_COLUMNS)
        table = pd.concat(frames, ignore_index=True)
        table = table.sort_values(COORDINATES + ['aggregate', 'run'], kind='mergesort', na_position='last')
        return table.reset_index(drop=True)


def preset_config(scale: str) -> ExperimentConfig:
    """
    'paper': the full parameter set (5 channels, 10 spans, ~5e5 symbols x 10 runs).
    'full' is an alias of 'paper'.
    'desk': 3 channels, 5 spans, 2^16 symbols, 4 runs, n in {10, 100, 1000, 10000}.
    """
    if scale in ('paper', 'full'):
        return ExperimentConfig(pairing_modes=('intra', 'inter', 'uniform'))
    if scale == 'desk':
        return ExperimentConfig(
            wdm=WdmConfig(num_channels=3),
            link=FiberLinkConfig(num_spans=5),
            block_lengths=(10, 100, 1000, 10000),
            pairing_modes=('intra',),
            interleave=(False, True),
            symbols_per_run=2 ** 16,
            num_runs=4,
            output='results/sweep_desk.csv',
        )
    raise ConfigError('scale', f"unknown scale {scale!r}; expected one of {', '.join(SCALES)}")


_POWER_RE = re.compile(r'^\s*([-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\s*(dBm|mW|W)?\s*$')


def parse_power_dbm(value: Union[str, float, int], path: str = 'link.power') -> float:
    """Launch power from a number (dBm) or a string such as '-0.5 dBm' or '0.89 mW'."""
    if isinstance(value, bool):
        raise ConfigError(path, "expected a power, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    match = _POWER_RE.match(str(value))
    if not match:
        raise ConfigError(path, f"cannot parse power {value!r}")
    number, unit = float(match.group(1)), match.group(2) or 'dBm'
    if unit == 'dBm':
        return number
    watts = number * (1e-3 if unit == 'mW' else 1.0)
    if watts <= 0:
        raise ConfigError(path, f"power must be positive, got {value!r}")
    return 10 * math.log10(watts) + 30


_TRUE_STRINGS = {'true', 'yes', 'on', '1'}
_FALSE_STRINGS = {'false', 'no', 'off', '0'}


def _to_bool(raw) -> bool:
    """Strict boolean: TOML booleans, 0/1 or the usual true/false words."""
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, int) and raw in (0, 1):
        return bool(raw)
    if isinstance(raw, str):
        word = raw.strip().lower()
        if word in _TRUE_STRINGS:
            return True
        if word in _FALSE_STRINGS:
            return False
    raise ValueError(f"not a boolean: {raw!r}")


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


# file key -> (dataclass field, converter, check, requirement)
_WDM_SCHEMA = {
    'channels': ('num_channels', int, lambda v: v >= 1 and v % 2 == 1, "must be a positive odd number"),
    'spacing_ghz': ('spacing_ghz', float, _positive, "must be positive"),
    'symbol_rate_gbd': ('symbol_rate_gbd', float, _positive, "must be positive"),
    'rolloff': ('rolloff', float, lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
    'oversampling': ('oversampling', int, lambda v: v >= 2, "must be at least 2"),
    'guard_symbols': ('guard_symbols', int, _non_negative, "must be non-negative"),
}
_LINK_SCHEMA = {
    'span_length_km': ('span_length_km', float, _positive, "must be positive"),
    'spans': ('num_spans', int, lambda v: v >= 1, "must be at least 1"),
    'alpha_db_per_km': ('alpha_db_per_km', float, _non_negative, "must be non-negative"),
    'dispersion_ps_nm_km': ('dispersion_ps_nm_km', float, _non_negative, "must be non-negative"),
    'gamma_per_w_km': ('gamma_per_w_km', float, _non_negative, "must be non-negative"),
    'noise_figure_db': ('edfa_noise_figure_db', float, lambda v: True, ""),
    'power': ('launch_power_dbm', None, lambda v: True, ""),
    'max_nl_phase_rad': ('max_nl_phase_rad', float, _positive, "must be positive"),
    'reference_wavelength_nm': ('reference_wavelength_nm', float, _positive, "must be positive"),
}
_EXPERIMENT_SCHEMA = {
    'symbols_per_run': ('symbols_per_run', int, _positive, "must be positive"),
    'runs': ('num_runs', int, lambda v: v >= 1, "must be at least 1"),
    'seed': ('base_seed', int, _non_negative, "must be non-negative"),
    'output': ('output', str, lambda v: bool(v), "must not be empty"),
    'fec_block_len': ('fec_block_len', int, _positive, "must be positive"),
    'workers': ('workers', int, lambda v: v >= 1, "must be at least 1"),
    'record_wall_time': ('record_wall_time', _to_bool, lambda v: True, ""),
    'field_dump_dir': ('field_dump_dir', str, lambda v: bool(v), "must not be empty"),
}
_SHAPING_KEYS = {'amplitudes', 'pmf', 'block_lengths', 'pairing_modes', 'interleave'}


def _apply_schema(section: str, values: Dict[str, Any], schema: Dict[str, tuple]) -> Dict[str, Any]:
    updates = {}
    for key, raw in values.items():
        path = f"{section}.{key}"
        if key not in schema:
            raise ConfigError(path, "unknown key")
        name, convert, check, requirement = schema[key]
        if key == 'power':
            value = parse_power_dbm(raw, path)
        else:
            try:
                value = convert(raw)
            except (TypeError, ValueError):
                raise ConfigError(path, f"cannot convert {raw!r}") from None
        if not check(value):
            raise ConfigError(path, f"{requirement}, got {raw!r}")
        updates[name] = value
    return updates


def _as_tuple(raw, convert, path: str) -> tuple:
    items = raw if isinstance(raw, (list, tuple)) else [raw]
    try:
        return tuple(convert(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(path, f"cannot convert {raw!r}") from None


def _shaping_updates(base: ExperimentConfig, values: Dict[str, Any]) -> Dict[str, Any]:
    for key in values:
        if key not in _SHAPING_KEYS:
            raise ConfigError(f"shaping.{key}", "unknown key")
    updates: Dict[str, Any] = {}
    if 'amplitudes' in values or 'pmf' in values:
        pmf = _as_tuple(values.get('pmf', base.alphabet.target_pmf), float, 'shaping.pmf')
        default_amps = base.alphabet.amplitudes if len(pmf) == base.alphabet.arity else tuple(
            2 * i + 1 for i in range(len(pmf)))
        amps = _as_tuple(values.get('amplitudes', default_amps), float, 'shaping.amplitudes')
        try:
            updates['alphabet'] = AmplitudeAlphabet(amps, pmf)
        except ValueError as e:
            raise ConfigError('shaping.pmf', str(e)) from None
    if 'block_lengths' in values:
        updates['block_lengths'] = _as_tuple(values['block_lengths'], int, 'shaping.block_lengths')
    if 'pairing_modes' in values:
        updates['pairing_modes'] = _as_tuple(values['pairing_modes'], str, 'shaping.pairing_modes')
    if 'interleave' in values:
        updates['interleave'] = _as_tuple(values['interleave'], _to_bool, 'shaping.interleave')
    return updates


def config_from_dict(data: Dict[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Overlay a parsed config mapping on `base` (full defaults when omitted)."""
    base = base or ExperimentConfig()
    sections = {'wdm', 'link', 'shaping', 'experiment'}
    for key, value in data.items():
        if key not in sections:
            raise ConfigError(key, "unknown section")
        if not isinstance(value, dict):
            raise ConfigError(key, "expected a table of keys")

    try:
        wdm = replace(base.wdm, **_apply_schema('wdm', data.get('wdm', {}), _WDM_SCHEMA))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError('wdm', str(e)) from None
    try:
        link = replace(base.link, **_apply_schema('link', data.get('link', {}), _LINK_SCHEMA))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError('link', str(e)) from None

    updates = _apply_schema('experiment', data.get('experiment', {}), _EXPERIMENT_SCHEMA)
    updates.update(_shaping_updates(base, data.get('shaping', {})))
    return replace(base, wdm=wdm, link=link, **updates)


def load_config(path: Union[str, Path], scale: Optional[str] = None) -> ExperimentConfig:
    """
    Load and validate a TOML experiment config.

    Omitted keys fall back to the full-scale simulation defaults, or
    to the named preset when `scale` is given.

    Raises:
        ConfigError: On unknown keys or invalid values, naming the field path
        OSError: If the file cannot be read
    """
    try:
        data = toml.load(str(path))
    except toml.TomlDecodeError as e:
        raise ConfigError(str(path), f"invalid TOML: {e}") from None
    base = preset_config(scale) if scale else None
    config = config_from_dict(data, base)
    if config.symbols_per_run < 10 * config.fec_block_len:
        logger.warning(
            f"symbols_per_run={config.symbols_per_run} is below 10 FEC blocks; "
            "statistics will be noisy"
        )
    logger.info(f"Loaded experiment config from {path}")
    return config


_PAIRING_INDEX = {mode: i for i, mode in enumerate(PAIRING_MODES)}


def point_seed(base_seed: int, n: int, pairing: str, interleaved: bool, run: int) -> int:
    """Deterministic 63-bit seed for one sweep coordinate and run."""
    ss = np.random.SeedSequence([base_seed, n, _PAIRING_INDEX[pairing], int(interleaved), run])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def sweep_points(config: ExperimentConfig) -> List[SweepPoint]:
    """All (n, pairing, interleave, run) combinations; the uniform reference ignores n."""
    points = []
    for pairing in config.pairing_modes:
        if pairing == 'uniform':
            combos = [(0, False)]
        else:
            combos = [(n, il) for n in config.block_lengths for il in config.interleave]
        for n, interleaved in combos:
            for run in range(config.num_runs):
                seed = point_seed(config.base_seed, n, pairing, interleaved, run)
                points.append(SweepPoint(n, pairing, interleaved, run, seed))
    return points


def field_dump_path(directory: Union[str, Path], point: SweepPoint) -> Path:
    """Received-field file of one run, e.g. n100_intra_plain_run3.ccof."""
    order = 'interleaved' if point.interleaved else 'plain'
    return Path(directory) / f"n{point.n}_{point.pairing}_{order}_run{point.run}.ccof"


def simulate_point(config: ExperimentConfig, point: SweepPoint) -> Dict[str, Any]:
    """
    One Monte-Carlo run: independent frames for every WDM channel, propagation,
    reception of the center channel and all metrics.
    """
    start = time.perf_counter()
    wdm, link = config.wdm, config.link
    constellation = QamConstellation.from_alphabet(config.alphabet)
    seeds = np.random.SeedSequence(point.seed).spawn(wdm.num_channels + 1)

    frames = []
    fields = []
    for k in range(wdm.num_channels):
        frame = build_frame(
            config.alphabet, point.n, point.pairing, config.frame_symbols, point.interleaved,
            seed=int(seeds[k].generate_state(1)[0]), fec_block_len=config.fec_block_len,
        )
        frames.append(frame)
        fields.append(rrc_shape(frame, wdm, link.launch_power_dbm))
    center = frames[wdm.center_index]
    report = frame_metrics(center, constellation)

    row = {
        'n': point.n, 'pairing': point.pairing, 'interleaved': point.interleaved,
        'run': point.run, 'seed': point.seed,
        'kl_bits': report.kl_divergence, 'kurtosis': report.kurtosis_2d,
        'run_ratio': report.run_ratio, 'run_ratio_abs': report.run_ratio_abs,
        'run_ratio_arg': report.run_ratio_arg,
    }
    try:
        tx = wdm_mux(fields, wdm.spacing_ghz, wdm.channel_bandwidth_hz)
        del fields
        rx = propagate_link(tx, link, wdm, np.random.default_rng(seeds[-1]))
        if config.field_dump_dir:
            dump = field_dump_path(config.field_dump_dir, point)
            dump.parent.mkdir(parents=True, exist_ok=True)
            write_field_file(rx, dump)
        y_x, y_y = rx_frontend(rx, wdm, link)
        row['snr_db'] = effective_snr_dual(y_x, y_y, center.symbols_x, center.symbols_y)
        row['status'] = 'ok'
    except PropagationError as e:
        logger.error(f"Run failed at n={point.n}, pairing={point.pairing}, run={point.run}: {e}")
        row['snr_db'] = math.nan
        row['status'] = 'failed'

    wall = time.perf_counter() - start
    row['wall_s'] = wall if config.record_wall_time else math.nan
    log_with_fields(logger, logging.INFO, "Sweep point finished",
                    n=point.n, pairing=point.pairing, interleaved=point.interleaved,
                    run=point.run, snr_db=row['snr_db'], wall_s=round(wall, 2))
    return row


def _simulate_task(args: Tuple[ExperimentConfig, SweepPoint]) -> Dict[str, Any]:
    return simulate_point(*args)


def aggregate_rows(rows: pd.DataFrame) -> pd.DataFrame:
    """
    Mean of every metric per sweep coordinate, with a normal-approximation 95%
    confidence interval on the SNR when at least two runs succeeded.
    """
    if rows.empty:
        return pd.DataFrame(columns=CSV_COLUMNS)
    ok = rows[rows['status'] == 'ok']
    records = []
    for (pairing, interleaved, n), group in ok.groupby(COORDINATES, sort=True):
        record = {'pairing': pairing, 'interleaved': interleaved, 'n': n,
                  'aggregate': 1, 'status': 'ok'}
        for col in METRIC_COLUMNS + ['wall_s']:
            record[col] = float(group[col].mean())
        count = len(group)
        if count >= 2:
            half = CI_Z * float(group['snr_db'].std(ddof=1)) / math.sqrt(count)
            record['ci_low_db'] = record['snr_db'] - half
            record['ci_high_db'] = record['snr_db'] + half
        records.append(record)
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)


def _finalize_rows(records: List[Dict[str, Any]]) -> pd.DataFrame:
    rows = pd.DataFrame.from_records(records, columns=CSV_COLUMNS)
    if rows.empty:
        return rows
    rows['aggregate'] = 0
    return rows.sort_values(COORDINATES + ['run'], kind='mergesort').reset_index(drop=True)


def run_sweep(
    config: ExperimentConfig,
    progress: Optional[ProgressSink] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    """
    Run every sweep point, in parallel when more than one worker is configured.

    Results do not depend on the execution order: each point carries its own
    seed and rows are sorted by coordinates before aggregation.

    Args:
        config: Validated experiment configuration
        progress: Optional callable(done, total, row) invoked as points finish
        workers: Overrides config.workers

    Returns:
        SweepResult with per-run rows and aggregate rows
    """
    points = sweep_points(config)
    workers = workers or config.workers
    total = len(points)
    logger.info(f"Running {total} sweep points on {workers} worker(s)")

    records: List[Dict[str, Any]] = []
    if workers == 1:
        for point in points:
            row = simulate_point(config, point)
            records.append(row)
            if progress:
                progress(len(records), total, row)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_simulate_task, (config, p)) for p in points]
            for future in as_completed(futures):
                row = future.result()
                records.append(row)
                if progress:
                    progress(len(records), total, row)

    rows = _finalize_rows(records)
    return SweepResult(rows=rows, aggregates=aggregate_rows(rows))


def _csv_table(result: SweepResult) -> pd.DataFrame:
    table = result.combined().reindex(columns=CSV_COLUMNS)
    if table.empty:
        return table
    for col in INTEGER_COLUMNS:
        table[col] = table[col].astype('Int64')
    table['interleaved'] = table['interleaved'].astype(int)
    return table


def emit_csv(result: SweepResult, path: Union[str, Path]) -> Path:
    """
    Write run rows and aggregate rows (aggregate=1) with 6 significant digits.

    Raises:
        OSError: If the path cannot be written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _csv_table(result).to_csv(path, index=False, float_format='%.6g', lineterminator='\n')
    logger.info(f"Wrote sweep results to {path}")
    return path


def read_sweep_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, dtype={col: 'Int64' for col in INTEGER_COLUMNS})


def run_shaping_sweep(
    alphabet: AmplitudeAlphabet,
    block_lengths: Tuple[int, ...],
    pairing_modes: Tuple[str, ...] = ('intra', 'inter'),
    interleave_flags: Tuple[bool, ...] = (False,),
    symbols: int = 100_000,
    seed: int = 0,
    fec_block_len: int = FEC_BLOCK_SYMBOLS,
) -> pd.DataFrame:
    """
    Channel-free sweep of KL divergence, kurtosis, run ratios and rate loss
    versus block length. Interleaved points use the symbol count floored to
    whole FEC blocks.
    """
    records = []
    for pairing in pairing_modes:
        lengths = (0,) if pairing == 'uniform' else block_lengths
        for n in lengths:
            for interleaved in interleave_flags:
                count = (symbols // fec_block_len) * fec_block_len if interleaved else symbols
                if count == 0:
                    raise ValueError(f"{symbols} symbols do not fill one FEC block of {fec_block_len}")
                frame = build_frame(alphabet, n, pairing, count, interleaved,
                                    seed=point_seed(seed, n, pairing, interleaved, 0),
                                    fec_block_len=fec_block_len)
                report = frame_metrics(frame, QamConstellation.from_alphabet(alphabet))
                loss = rate_loss(composition_from_pmf(alphabet, n), alphabet) if n else math.nan
                records.append({
                    'n': n, 'pairing': pairing, 'interleaved': int(interleaved),
                    'kl_bits': report.kl_divergence, 'kurtosis': report.kurtosis_2d,
                    'run_ratio': report.run_ratio, 'run_ratio_abs': report.run_ratio_abs,
                    'run_ratio_arg': report.run_ratio_arg, 'rate_loss': loss,
                    'symbols': count,
                })
    return pd.DataFrame.from_records(records)


def summary_table(table: pd.DataFrame, metric: str = 'snr_db') -> pd.DataFrame:
    """Aggregate rows pivoted to one row per n and one column per pairing/interleave setting."""
    if metric not in METRIC_COLUMNS:
        raise ValueError(f"Unknown metric {metric!r}; expected one of {METRIC_COLUMNS}")
    agg = table[table['aggregate'] == 1]
    if agg.empty:
        return pd.DataFrame()
    labels = [f"{p}+interleaved" if bool(il) else str(p) for p, il in zip(agg['pairing'], agg['interleaved'])]
    pivot = agg.assign(setting=labels).pivot_table(index='n', columns='setting', values=metric, aggfunc='first')
    pivot.columns.name = None
    return pivot.sort_index()
