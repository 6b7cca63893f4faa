import json
import math
from fractions import Fraction

import pytest
from click.testing import CliRunner

import cli
from artin_density import RealWithError
from singular_series import SingularSeriesEstimate


@pytest.fixture
def runner():
    return CliRunner()


def envelope(result):
    """The JSON line of an invocation, skipping any log lines"""
    lines = [line for line in result.output.splitlines() if line.startswith('{')]
    assert len(lines) == 1, result.output
    return json.loads(lines[0])


class TestNormalize:
    """Unit tests for envelope serialization"""

    def test_scalars(self):
        """Test Fraction, float precision, inf and complex"""
        assert cli.normalize(Fraction(9, 8)) == "9/8"
        assert cli.normalize(1 / 3) == 0.333333333333
        assert cli.normalize(math.inf) == "inf"
        assert cli.normalize(1 + 2j) == {"re": 1.0, "im": 2.0}
        assert cli.normalize({3, 1, 2}) == [1, 2, 3]

    def test_dataclass(self):
        """Test nested dataclasses become dicts"""
        value = cli.normalize(RealWithError(value=0.5, error_bound=1e-6))
        assert value == {"value": 0.5, "error_bound": 1e-6}

    def test_sorted_keys(self):
        """Test envelopes serialize with sorted keys"""
        text = cli.render("spec", {"a": 2}, {"h": 1, "delta": 8}, {})
        assert list(json.loads(text)) == ["command", "inputs", "result", "truncation", "version"]
        assert text.index('"delta"') < text.index('"h"')

    def test_unknown_type(self):
        """Test that unsupported values are refused"""
        with pytest.raises(TypeError):
            cli.normalize(object())


class TestCommands:
    """Tests for the cli subcommands"""

    def test_spec(self, runner):
        """Test spec 27"""
        result = runner.invoke(cli.cli, ['spec', '27'])
        assert result.exit_code == 0
        data = envelope(result)
        assert data['command'] == 'spec'
        assert data['result'] == {'a': 27, 'delta': 12, 'h': 3}
        assert data['version'] == cli.__version__

    def test_negative_base(self, runner):
        """Test a negative base is read as an argument"""
        result = runner.invoke(cli.cli, ['spec', '-759375'])
        assert result.exit_code == 0
        assert envelope(result)['result'] == {'a': -759375, 'delta': -15, 'h': 5}

    def test_invalid_base_exit_code(self, runner):
        """Test InvalidBase maps to exit 1 with the message"""
        result = runner.invoke(cli.cli, ['spec', '4'])
        assert result.exit_code == 1
        assert 'Error:' in result.output

    def test_parse_error_exit_code(self, runner):
        """Test malformed arguments map to exit 2"""
        assert runner.invoke(cli.cli, ['spec', 'abc']).exit_code == 2
        assert runner.invoke(cli.cli, ['verify', '2', '2', '2']).exit_code == 2
        result = runner.invoke(cli.cli, ['verify', '2', '2', '2', '--n-range', '1:9'])
        assert result.exit_code == 2

    def test_table(self, runner):
        """Test table 27 gives [3] mod 12"""
        data = envelope(runner.invoke(cli.cli, ['table', '27']))
        assert data['result'] == {'modulus': 12, 'residues': [3]}

    def test_table_csv(self, runner):
        """Test CSV rows for table -4"""
        result = runner.invoke(cli.cli, ['table', '-4', '--csv'])
        assert result.exit_code == 0
        assert 'modulus,residue\n12,1\n12,5\n12,9\n' in result.output

    def test_rho(self, runner):
        """Test rho 1 3 gives 9/8"""
        data = envelope(runner.invoke(cli.cli, ['rho', '1', '3']))
        assert data['result'] == {'rho': '9/8', 'closed_form': '9/8'}

    def test_delta(self, runner):
        """Test delta 27 5 12 reports exact ratios"""
        data = envelope(runner.invoke(cli.cli, ['delta', '27', '5', '12', '--pmax', '1000']))
        assert data['result']['ratio'] == '1/1'
        assert data['result']['a_mod_ratio'] == '1/2'
        assert data['truncation'] == {'pmax': 1000}

    def test_positivity(self, runner):
        """Test the vanishing witness for 27 at n = 7"""
        data = envelope(runner.invoke(cli.cli, ['positivity', '27', '27', '27', '7']))
        assert data['result'] == {'positive': False, 'witness': {'vanishing_modulus': 12}}

    def test_constant_round_trip(self, runner):
        """Test inputs echo back and the constant is positive"""
        args = ['constant', '27', '27', '27', '15', '--pmax', '1000', '--threads', '1']
        data = envelope(runner.invoke(cli.cli, args))
        assert data['inputs'] == {'bases': [27, 27, 27], 'n': 15}
        assert data['result']['value'] > 0
        assert data['truncation'] == {'pmax': 1000}

    def test_constant_huge_n(self, runner):
        """Test n past the int64 range yields an envelope, not a traceback"""
        for n, positive in (('100000000000000000000', False), ('100000000000000000001', True)):
            result = runner.invoke(cli.cli, ['constant', '2', '2', '2', n, '--pmax', '1000'])
            assert result.exit_code == 0, result.output
            data = envelope(result)
            assert data['inputs']['n'] == int(n)
            assert (data['result']['value'] > 0) == positive

    def test_crosscheck_reuses_euler_value(self, runner):
        """Test crosscheck reports the same Euler value as constant"""
        constant = envelope(runner.invoke(cli.cli, ['constant', '2', '2', '2', '101', '--pmax', '1000']))
        cross = envelope(runner.invoke(cli.cli, ['crosscheck', '2', '2', '2', '101', '--pmax', '1000',
                                                 '--kmax', '2', '--qmax', '4']))
        assert cross['result']['euler'] == constant['result']
        assert cross['truncation'] == {'pmax': 1000, 'kmax': 2, 'qmax': 4}

    def test_crosscheck_gap(self, runner, mocker):
        """Test the relative gap against a patched k-sum"""
        euler = SingularSeriesEstimate(value=0.2, rational_part=Fraction(1),
                                       transcendental_part=RealWithError(0.4, 0.0))
        ksum = SingularSeriesEstimate(value=0.21, rational_part=Fraction(1),
                                      transcendental_part=RealWithError(0.42, 0.0))
        mocker.patch('cli.euler_constant', return_value=euler)
        mocker.patch('cli.ksum_constant', return_value=ksum)
        data = envelope(runner.invoke(cli.cli, ['crosscheck', '2', '2', '2', '101']))
        assert data['result']['relative_gap'] == pytest.approx(0.05)

    def test_moree(self, runner):
        """Test moree reports partial, target and gap"""
        data = envelope(runner.invoke(cli.cli, ['moree', '27', '12', '7', '--kmax', '50',
                                                '--pmax', '1000']))
        assert data['result']['target'] == 0
        assert set(data['result']) == {'partial', 'target', 'gap'}

    def test_moree_zero_modulus(self, runner):
        """Test q = 0 maps to exit 1"""
        result = runner.invoke(cli.cli, ['moree', '2', '0', '1'])
        assert result.exit_code == 1
        assert 'Error:' in result.output

    def test_nonfact_demo(self, runner):
        """Test the non-factorization report"""
        data = envelope(runner.invoke(cli.cli, ['nonfact-demo']))
        assert data['result']['positive_mod_15'] == [7, 13, 14]
        assert data['result']['sigma_15_at_7'] == '0/1'

    def test_nonfact_mismatch_exit_code(self, runner, mocker):
        """Test a failed sub-check maps to exit 1"""
        mocker.patch('cli.nonfactorization_witness',
                     side_effect=cli.NonFactorizationMismatch("positivity set mod 15"))
        result = runner.invoke(cli.cli, ['nonfact-demo'])
        assert result.exit_code == 1
        assert 'positivity set mod 15' in result.output

    def test_version(self, runner):
        """Test --version"""
        result = runner.invoke(cli.cli, ['--version'])
        assert cli.__version__ in result.output


class TestVerify:
    """Tests for the verify subcommand"""

    def test_single_n(self, runner):
        """Test n = 9 for (2, 2, 2)"""
        result = runner.invoke(cli.cli, ['verify', '2', '2', '2', '9', '--sieve-limit', '100',
                                         '--pmax', '1000'])
        assert result.exit_code == 0
        data = envelope(result)
        assert data['result']['raw_count'] == 1
        assert data['inputs']['exclude_small'] is False
        assert data['truncation'] == {'pmax': 1000, 'sieve_limit': 100}

    def test_sieve_too_small(self, runner):
        """Test n past the sieve limit maps to exit 1"""
        result = runner.invoke(cli.cli, ['verify', '2', '2', '2', '501', '--sieve-limit', '100',
                                         '--pmax', '1000'])
        assert result.exit_code == 1

    def test_non_positive_n(self, runner):
        """Test n = 0 maps to exit 1"""
        result = runner.invoke(cli.cli, ['verify', '2', '2', '2', '0', '--sieve-limit', '100',
                                         '--pmax', '1000'])
        assert result.exit_code == 1

    def test_range_csv(self, runner):
        """Test batch mode emits one row per n"""
        result = runner.invoke(cli.cli, ['verify', '2', '2', '2', '--n-range', '101:121:10',
                                         '--sieve-limit', '200', '--pmax', '1000', '--csv'])
        assert result.exit_code == 0
        rows = [line for line in result.output.splitlines() if ',' in line and ' - ' not in line]
        assert rows[0] == 'n,raw_count,weighted_sum,predicted,ratio'
        assert [row.split(',')[0] for row in rows[1:]] == ['101', '111', '121']

    def test_range_envelope(self, runner):
        """Test batch mode echoes the range"""
        data = envelope(runner.invoke(cli.cli, ['verify', '2', '2', '2', '--n-range', '101:111:10',
                                                '--sieve-limit', '200', '--pmax', '1000']))
        assert data['inputs']['n_range'] == '101:111:10'
        assert [r['n'] for r in data['result']] == [101, 111]

    def test_cache_is_reused(self, runner, mocker, tmp_path):
        """Test the second run loads the sieve from the cache file"""
        path = str(tmp_path / 'sieve.bin')
        args = ['verify', '2', '2', '2', '101', '--sieve-limit', '200', '--pmax', '1000',
                '--cache', path]
        sieve_spy = mocker.spy(cli, 'sieve')
        first = envelope(runner.invoke(cli.cli, args))
        second = envelope(runner.invoke(cli.cli, args))
        assert sieve_spy.call_count == 1
        assert first['result'] == second['result']
