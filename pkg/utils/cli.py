"""
Command-line entry point.

    ccdm-sim sweep [config.toml] [--scale desk|paper] [--seed N] [--out PATH] ...
    ccdm-sim shaping [--pmf ...] [--n 10,100,...]
    ccdm-sim frame --n 10 --pairing intra --symbols 10800 --out frame.ccqf
    ccdm-sim metrics frame.ccqf
    ccdm-sim ccdm encode --composition 4,3,2,1 --bits 0101010101010
    ccdm-sim ccdm decode --composition 4,3,2,1 --sequence 0,0,1,...
    ccdm-sim validate
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from utils import config as settings
from utils.harness import (
    SCALES,
    ConfigError,
    ExperimentConfig,
    emit_csv,
    load_config,
    preset_config,
    run_shaping_sweep,
    run_sweep,
)
from utils.logger import setup_logger
from utils.mapping import PAIRING_MODES, QamConstellation, build_frame
from utils.metrics import stream_metrics
from utils.shaping import (
    AmplitudeAlphabet,
    AmplitudeSequence,
    Composition,
    ccdm_decode,
    ccdm_encode,
)
from utils.symbol_io import read_symbol_file, write_symbol_file
from utils.validation import run_checks

logger = logging.getLogger(__name__)

DEFAULT_PMF = '0.4,0.3,0.2,0.1'


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.replace(' ', '').split(',') if v != '']
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(' ', '').split(',') if v != '']
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _bit_string(text: str) -> List[int]:
    bits = text.strip()
    if not bits or any(ch not in '01' for ch in bits):
        raise argparse.ArgumentTypeError(f"expected a string of 0s and 1s, got {text!r}")
    return [int(ch) for ch in bits]


def _alphabet(args) -> AmplitudeAlphabet:
    if args.amplitudes:
        return AmplitudeAlphabet(tuple(args.amplitudes), tuple(args.pmf))
    return AmplitudeAlphabet.ask(args.pmf)


def _add_alphabet_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--pmf', type=_float_list, default=_float_list(DEFAULT_PMF),
                        help=f"One-sided target PMF (default: {DEFAULT_PMF})")
    parser.add_argument('--amplitudes', type=_float_list, default=None,
                        help="Amplitude levels (default: 1,3,5,...)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ccdm-sim',
        description="CCDM probabilistic shaping and nonlinear fiber channel simulator",
    )
    sub = parser.add_subparsers(dest='command', required=True)

    sweep = sub.add_parser('sweep', help="Run the SNR sweep over block lengths")
    sweep.add_argument('config', nargs='?', help="TOML experiment config")
    sweep.add_argument('--scale', choices=SCALES, help="Preset experiment size ('full' is an alias of 'paper')")
    sweep.add_argument('--seed', type=int, help="Base seed (overrides config and RNG_SEED)")
    sweep.add_argument('--out', help="CSV output path")
    sweep.add_argument('--runs', type=int, help="Monte-Carlo runs per point")
    sweep.add_argument('--symbols', type=int, help="Symbols per run")
    sweep.add_argument('--workers', type=int, help="Worker processes (default: SIM_WORKERS)")
    sweep.add_argument('--timing', action='store_true', help="Record wall time per run")
    sweep.add_argument('--dump-fields', metavar='DIR', help="Write every received field to DIR for debugging")

    shaping = sub.add_parser('shaping', help="Channel-free shaping metrics versus block length")
    _add_alphabet_args(shaping)
    shaping.add_argument('--n', type=_int_list, default=[10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
                         help="Block lengths")
    shaping.add_argument('--pairing', type=lambda s: s.split(','), default=['intra', 'inter'],
                         help="Pairing modes")
    shaping.add_argument('--interleave', action='store_true', help="Also evaluate interleaved frames")
    shaping.add_argument('--symbols', type=int, default=100_000, help="Symbols per point")
    shaping.add_argument('--seed', type=int, help="Base seed")
    shaping.add_argument('--out', help="CSV output path (default: standard output)")

    frame = sub.add_parser('frame', help="Generate a symbol file")
    _add_alphabet_args(frame)
    frame.add_argument('--n', type=int, required=True, help="DM block length")
    frame.add_argument('--pairing', choices=PAIRING_MODES, default='intra')
    frame.add_argument('--symbols', type=int, default=settings.FEC_BLOCK_SYMBOLS)
    frame.add_argument('--interleave', action='store_true')
    frame.add_argument('--seed', type=int)
    frame.add_argument('--out', required=True, help="Symbol file path")

    metrics = sub.add_parser('metrics', help="Sequence metrics of a symbol file")
    metrics.add_argument('symbol_file')
    _add_alphabet_args(metrics)
    metrics.add_argument('--out', help="CSV output path (default: standard output)")

    ccdm = sub.add_parser('ccdm', help="Encode or decode one CCDM block")
    ccdm_sub = ccdm.add_subparsers(dest='action', required=True)
    enc = ccdm_sub.add_parser('encode')
    enc.add_argument('--composition', type=_int_list, required=True)
    enc.add_argument('--bits', type=_bit_string, required=True)
    dec = ccdm_sub.add_parser('decode')
    dec.add_argument('--composition', type=_int_list, required=True)
    dec.add_argument('--sequence', type=_int_list, required=True)

    validate = sub.add_parser('validate', help="Check the channel model against closed-form limits")
    validate.add_argument('--seed', type=int, default=0)

    return parser


def _resolve_seed(explicit: Optional[int], fallback: int = 0) -> int:
    if explicit is not None:
        return explicit
    if settings.RNG_SEED is not None:
        return settings.RNG_SEED
    return fallback


def _sweep_config(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config, scale=args.scale)
    elif args.scale:
        config = preset_config(args.scale)
    else:
        config = ExperimentConfig()

    overrides = {}
    if args.workers:
        overrides['workers'] = args.workers
    elif os.environ.get('SIM_WORKERS'):
        overrides['workers'] = settings.SIM_WORKERS
    if args.seed is not None or settings.RNG_SEED is not None:
        overrides['base_seed'] = _resolve_seed(args.seed)
    if args.out:
        overrides['output'] = args.out
    if args.runs is not None:
        overrides['num_runs'] = args.runs
    if args.symbols is not None:
        overrides['symbols_per_run'] = args.symbols
    if args.timing:
        overrides['record_wall_time'] = True
    if args.dump_fields:
        overrides['field_dump_dir'] = args.dump_fields
    return replace(config, **overrides)


def cmd_sweep(args) -> int:
    config = _sweep_config(args)
    logger.info(
        f"Sweep: {config.wdm.num_channels} channels, {config.link.num_spans} spans, "
        f"{config.frame_symbols} symbols x {config.num_runs} runs, seed {config.base_seed}"
    )
    with tqdm(desc='sweep', unit='run', file=sys.stderr) as bar:
        def progress(done, total, row):
            bar.total = total
            bar.update(1)
            bar.set_postfix(n=row['n'], pairing=row['pairing'], snr=f"{row['snr_db']:.2f}")

        result = run_sweep(config, progress=progress)

    failed = int((result.rows['status'] == 'failed').sum()) if not result.rows.empty else 0
    if failed:
        logger.warning(f"{failed} run(s) failed; see rows with status=failed")
    path = emit_csv(result, config.output)
    print(path)
    return 0


def cmd_shaping(args) -> int:
    flags = (False, True) if args.interleave else (False,)
    table = run_shaping_sweep(
        _alphabet(args), tuple(args.n), tuple(args.pairing), flags,
        symbols=args.symbols, seed=_resolve_seed(args.seed),
    )
    _write_table(table, args.out)
    return 0


def cmd_frame(args) -> int:
    frame = build_frame(_alphabet(args), args.n, args.pairing, args.symbols, args.interleave,
                        seed=_resolve_seed(args.seed))
    write_symbol_file(frame, args.out)
    return 0


def cmd_metrics(args) -> int:
    data = read_symbol_file(args.symbol_file)
    report = stream_metrics(data['symbols_x'], data['symbols_y'],
                            QamConstellation.from_alphabet(_alphabet(args)))
    row = report.to_dict()
    row.update(n=data['n'], pairing_mode=data['pairing_mode'], interleaved=data['interleaved'])
    _write_table(pd.DataFrame([row]), args.out)
    return 0


def cmd_ccdm(args) -> int:
    c = Composition(tuple(args.composition))
    if args.action == 'encode':
        seq = ccdm_encode(args.bits, c)
        print(','.join(str(int(s)) for s in seq.symbols))
    else:
        bits = ccdm_decode(AmplitudeSequence(np.asarray(args.sequence)), c)
        print(''.join(str(int(b)) for b in bits))
    return 0


def cmd_validate(args) -> int:
    results = run_checks(seed=args.seed)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def _write_table(table: pd.DataFrame, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out, index=False, float_format='%.6g', lineterminator='\n')
        print(out)
    else:
        table.to_csv(sys.stdout, index=False, float_format='%.6g', lineterminator='\n')


COMMANDS = {
    'sweep': cmd_sweep,
    'shaping': cmd_shaping,
    'frame': cmd_frame,
    'metrics': cmd_metrics,
    'ccdm': cmd_ccdm,
    'validate': cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    setup_logger('utils')
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
