import json
import math
import os

import pyarrow.csv
import pytest

from thermocat.app import StateInfoApp, ThermocatApp, main


def read_json(path):
    with open(path) as f:
        return json.load(f)


def test_state_info(tmpdir, capsys):
    out = str(tmpdir)
    main(['state-info', '--state=thermal', '--variance=3', '--displacement=1',
          '--out=%s' % out])
    info = read_json(os.path.join(out, 'state_info.json'))
    assert info['purity'] == pytest.approx(1 / 3)
    assert info['linear_entropy'] == pytest.approx(2 / 3)
    assert info['mean_photon'] == [pytest.approx(2.0)]
    assert info['temperature'] == pytest.approx(1 / math.log(2))
    assert json.loads(capsys.readouterr().out)['modes'] == 1

    manifest = read_json(os.path.join(out, 'manifest.json'))
    assert manifest['subcommand'] == 'thermocat-state-info'
    assert manifest['parameters']['variance'] == 3
    assert set(manifest['versions']) == {'thermocat', 'numpy', 'scipy',
                                         'traitlets', 'pyarrow'}
    assert os.path.exists(os.path.join(out, 'timing.json'))


def test_invalid_parameters_exit_2(tmpdir):
    with pytest.raises(SystemExit) as exc:
        main(['state-info', '--variance=0.5', '--out=%s' % tmpdir])
    assert exc.value.code == 2


def test_malformed_value_exits_1(tmpdir):
    with pytest.raises(SystemExit) as exc:
        main(['state-info', '--variance=abc', '--out=%s' % tmpdir])
    assert exc.value.code == 1


def test_config_file_and_precedence(tmpdir):
    path = tmpdir.join('run.cfg')
    path.write("# split state\n"
               "state = split\n"
               "variance = 10\n"
               "displacement=0\n"
               "sign = +\n"
               "StateInfoApp.print_json = false\n")
    app = StateInfoApp()
    app.initialize(['--config=%s' % path, '--variance=3'])
    assert app.state == 'split'
    assert app.displacement == 0
    assert app.sign == '+'
    assert app.print_json is False
    assert app.variance == 3


def test_config_file_errors(tmpdir):
    path = tmpdir.join('bad.cfg')
    path.write("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        StateInfoApp().initialize(['--config=%s' % path])
    assert exc.value.code == 2


def test_subcommands_registered():
    assert set(ThermocatApp.subcommands) == {
        'fig1', 'fig2', 'fig3', 'fig4a', 'fig4b', 'decoherence', 'oracle-check',
        'state-info'}


def test_fig1(tmpdir):
    out = str(tmpdir)
    main(['fig1', '--out=%s' % out])
    summary = read_json(os.path.join(out, 'manifest.json'))['summary']
    assert summary['visibility'] >= 0.999
    assert summary['fringe_spacing'] == pytest.approx(math.pi / 200, rel=1e-3)
    assert summary['x_peaks'] == [pytest.approx(-100, abs=0.1),
                                  pytest.approx(100, abs=0.1)]
    table = pyarrow.csv.read_csv(os.path.join(out, 'marginal_p.csv'))
    assert table.column_names == ['coordinate', 'density']


def test_fig2(tmpdir):
    out = str(tmpdir)
    main(['fig2', '--out=%s' % out])
    summary = read_json(os.path.join(out, 'manifest.json'))['summary']
    assert summary['origin_minus'] == pytest.approx(-2 / math.pi, abs=0.01)
    assert summary['grid_max_plus'] == [pytest.approx(0, abs=1e-9)] * 2
    probabilities = read_json(os.path.join(out, 'probabilities.json'))
    check = probabilities['V=5,d=1']
    assert check['P-_oracle'] == pytest.approx(check['P-_trace'], abs=1e-6)
    table = pyarrow.csv.read_csv(os.path.join(out, 'wigner_minus.csv'))
    assert table.num_rows == 121 * 121


def test_fig3(tmpdir):
    out = str(tmpdir)
    main(['fig3', '--out=%s' % out])
    summary = read_json(os.path.join(out, 'manifest.json'))['summary']
    assert summary['visibility'] >= 0.999
    assert summary['axis_angle'] == pytest.approx(math.pi / 2000)
    lobes = summary['peaks']['recentred_pprime']
    assert len(lobes) == 2
    assert lobes[0] == pytest.approx(-lobes[1], abs=0.05)


@pytest.mark.slow
def test_decoherence_case(tmpdir):
    out = str(tmpdir)
    main(['decoherence', '--case=v3d1', '--out=%s' % out])
    summary = read_json(os.path.join(out, 'manifest.json'))['summary']
    assert summary['v3d1']['within']
    assert summary['v3d1']['quoted'] == 0.13
    assert summary['v3d1']['ratio'] == pytest.approx(
        0.13 / summary['v3d1']['gamma_t'])
    assert os.path.exists(os.path.join(out, 'decoherence_v3d1.csv'))
    table = pyarrow.csv.read_csv(os.path.join(out, 'decoherence_summary.csv'))
    assert table.column_names == ['case', 'gamma_t', 'quoted', 'ratio', 'bracketed']
    assert table.column('case').to_pylist() == ['v3d1']


@pytest.mark.slow
def test_oracle_check(tmpdir):
    out = str(tmpdir)
    main(['oracle-check', '--out=%s' % out])
    summary = read_json(os.path.join(out, 'manifest.json'))['summary']
    assert summary['mismatches'] == 0
