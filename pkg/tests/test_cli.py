import pandas as pd
import pytest

import utils.cli as cli
from utils import config as settings
from utils.validation import CheckResult

TINY_SWEEP = """
[wdm]
channels = 1
oversampling = 2
guard_symbols = 64

[link]
spans = 1

[shaping]
block_lengths = [10]
pairing_modes = ["intra"]
interleave = [false]

[experiment]
symbols_per_run = 1000
fec_block_len = 500
runs = 2
"""


class TestCcdmCommand:
    def test_encode(self, capsys):
        assert cli.main(['ccdm', 'encode', '--composition', '4,3,2,1', '--bits', '0' * 13]) == 0
        assert capsys.readouterr().out.strip() == '0,0,0,0,1,1,1,2,2,3'

    def test_decode(self, capsys):
        rc = cli.main(['ccdm', 'decode', '--composition', '4,3,2,1', '--sequence', '0,0,0,0,1,1,1,2,2,3'])
        assert rc == 0
        assert capsys.readouterr().out.strip() == '0' * 13

    def test_non_codeword(self, capsys):
        rc = cli.main(['ccdm', 'decode', '--composition', '4,3,2,1', '--sequence', '0,0,0,0,1,1,1,3,2,2'])
        assert rc == 1
        assert capsys.readouterr().err.startswith('error:')

    def test_bad_bits(self):
        with pytest.raises(SystemExit) as info:
            cli.main(['ccdm', 'encode', '--composition', '4,3,2,1', '--bits', '0120'])
        assert info.value.code == 2


class TestFrameAndMetrics:
    def test_frame_then_metrics(self, tmp_path, capsys):
        path = tmp_path / 'frame.ccqf'
        assert cli.main(['frame', '--n', '20', '--pairing', 'inter', '--symbols', '2000',
                         '--seed', '3', '--out', str(path)]) == 0
        assert path.exists()
        capsys.readouterr()

        out = tmp_path / 'metrics.csv'
        assert cli.main(['metrics', str(path), '--out', str(out)]) == 0
        row = pd.read_csv(out).iloc[0]
        assert row['n'] == 20
        assert row['pairing_mode'] == 'inter'
        assert 1.5 < row['kurtosis_2d'] < 1.8

    def test_missing_symbol_file(self, tmp_path, capsys):
        assert cli.main(['metrics', str(tmp_path / 'nope.ccqf')]) == 1
        assert 'error:' in capsys.readouterr().err

    def test_frame_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, 'RNG_SEED', 41)
        a, b = tmp_path / 'a.ccqf', tmp_path / 'b.ccqf'
        cli.main(['frame', '--n', '10', '--symbols', '500', '--out', str(a)])
        cli.main(['frame', '--n', '10', '--symbols', '500', '--seed', '41', '--out', str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestShapingCommand:
    def test_writes_table_to_stdout(self, capsys):
        assert cli.main(['shaping', '--n', '10,100', '--pairing', 'intra', '--symbols', '5000', '--seed', '1']) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith('n,pairing,interleaved,kl_bits')
        assert len(lines) == 3


class TestSweepCommand:
    def test_sweep_from_config(self, tmp_path, capsys):
        config = tmp_path / 'tiny.toml'
        config.write_text(TINY_SWEEP)
        out = tmp_path / 'results' / 'tiny.csv'
        assert cli.main(['sweep', str(config), '--out', str(out), '--seed', '5']) == 0
        assert capsys.readouterr().out.strip() == str(out)
        table = pd.read_csv(out)
        assert list(table['aggregate']) == [0, 0, 1]
        assert (table['status'] == 'ok').all()

    def test_dump_fields(self, tmp_path):
        config = tmp_path / 'tiny.toml'
        config.write_text(TINY_SWEEP)
        fields = tmp_path / 'fields'
        assert cli.main(['sweep', str(config), '--out', str(tmp_path / 'tiny.csv'),
                         '--runs', '1', '--dump-fields', str(fields)]) == 0
        assert [p.name for p in fields.iterdir()] == ['n10_intra_plain_run0.ccof']

    def test_runs_override(self, tmp_path):
        config = tmp_path / 'tiny.toml'
        config.write_text(TINY_SWEEP)
        out = tmp_path / 'one.csv'
        assert cli.main(['sweep', str(config), '--out', str(out), '--runs', '1']) == 0
        assert list(pd.read_csv(out)['aggregate']) == [0, 1]

    def test_invalid_config(self, tmp_path, capsys):
        config = tmp_path / 'bad.toml'
        config.write_text('[link]\nspanz = 3\n')
        assert cli.main(['sweep', str(config)]) == 2
        assert 'link.spanz' in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert cli.main(['sweep', str(tmp_path / 'missing.toml')]) == 1

    def test_seed_precedence(self, tmp_path, monkeypatch):
        config = tmp_path / 'tiny.toml'
        config.write_text(TINY_SWEEP + 'seed = 9\n')
        args = cli.build_parser().parse_args(['sweep', str(config)])
        assert cli._sweep_config(args).base_seed == 9

        monkeypatch.setattr(settings, 'RNG_SEED', 17)
        assert cli._sweep_config(args).base_seed == 17
        args = cli.build_parser().parse_args(['sweep', str(config), '--seed', '3'])
        assert cli._sweep_config(args).base_seed == 3

    def test_workers_precedence(self, tmp_path, monkeypatch):
        config = tmp_path / 'tiny.toml'
        config.write_text(TINY_SWEEP + 'workers = 3\n')
        args = cli.build_parser().parse_args(['sweep', str(config)])
        monkeypatch.delenv('SIM_WORKERS', raising=False)
        assert cli._sweep_config(args).workers == 3

        monkeypatch.setenv('SIM_WORKERS', '2')
        monkeypatch.setattr(settings, 'SIM_WORKERS', 2)
        assert cli._sweep_config(args).workers == 2
        args = cli.build_parser().parse_args(['sweep', str(config), '--workers', '4'])
        assert cli._sweep_config(args).workers == 4

    @pytest.mark.parametrize("scale", ['paper', 'full'])
    def test_full_scale_preset(self, scale, monkeypatch):
        monkeypatch.delenv('SIM_WORKERS', raising=False)
        monkeypatch.setattr(settings, 'RNG_SEED', None)
        args = cli.build_parser().parse_args(['sweep', '--scale', scale])
        config = cli._sweep_config(args)
        assert config.wdm.num_channels == 5
        assert config.link.num_spans == 10
        assert config.frame_symbols == 496_800

    def test_unknown_scale(self):
        with pytest.raises(SystemExit) as info:
            cli.build_parser().parse_args(['sweep', '--scale', 'huge'])
        assert info.value.code == 2


class TestValidateCommand:
    def test_all_pass(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, 'run_checks', lambda seed: [CheckResult('a', True, 0.0, 1.0, 'ok')])
        assert cli.main(['validate']) == 0
        assert capsys.readouterr().out.startswith('PASS a')

    def test_failure_sets_exit_code(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, 'run_checks', lambda seed: [
            CheckResult('a', True, 0.0, 1.0),
            CheckResult('b', False, 5.0, 1.0),
        ])
        assert cli.main(['validate', '--seed', '2']) == 1
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith('PASS a')
        assert out[1].startswith('FAIL b')
