"""Desk-scale sweeps; minutes to hours of CPU time. Run with `pytest -m slow`."""

from dataclasses import replace

import pytest

from utils import config as settings
from utils.harness import emit_csv, preset_config, run_sweep

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def desk_result():
    return run_sweep(replace(preset_config('desk'), workers=settings.SIM_WORKERS))


def aggregate(result, interleaved):
    agg = result.aggregates
    return agg[(agg['pairing'] == 'intra') & (agg['interleaved'] == interleaved)].set_index('n')


def test_short_blocks_gain_snr(desk_result):
    plain = aggregate(desk_result, False)
    assert plain.loc[10, 'snr_db'] - plain.loc[10000, 'snr_db'] >= 0.3
    for shorter, longer in zip(plain.index[:-1], plain.index[1:]):
        noise = plain.loc[shorter, 'snr_db'] - plain.loc[shorter, 'ci_low_db']
        assert plain.loc[shorter, 'snr_db'] + noise >= plain.loc[longer, 'snr_db']


def test_interleaving_removes_the_gain(desk_result):
    snr = aggregate(desk_result, True)['snr_db']
    assert snr.max() - snr.min() <= 0.1


def test_run_ratio_trends(desk_result):
    plain = aggregate(desk_result, False)
    assert plain.loc[10, 'run_ratio'] > plain.loc[100, 'run_ratio'] > plain.loc[10000, 'run_ratio']
    assert plain.loc[10, 'run_ratio_arg'] > plain.loc[100, 'run_ratio_arg'] > plain.loc[10000, 'run_ratio_arg']
    abs_ratio = plain['run_ratio_abs']
    assert abs_ratio.max() / abs_ratio.min() - 1 < 0.01

    mixed = aggregate(desk_result, True)['run_ratio']
    assert mixed.max() / mixed.min() - 1 < 0.01


def test_linear_channel_is_blind_to_block_length():
    config = replace(
        preset_config('desk'),
        link=replace(preset_config('desk').link, gamma_per_w_km=0.0),
        block_lengths=(10, 1000, 10000),
        interleave=(False,),
        workers=settings.SIM_WORKERS,
    )
    agg = run_sweep(config).aggregates.set_index('n')
    assert agg['ci_low_db'].max() <= agg['ci_high_db'].min()


def test_desk_csv_is_reproducible(desk_result, tmp_path):
    config = replace(preset_config('desk'), workers=settings.SIM_WORKERS)
    first = emit_csv(desk_result, tmp_path / 'first.csv')
    second = emit_csv(run_sweep(config), tmp_path / 'second.csv')
    assert first.read_bytes() == second.read_bytes()
