"""
Tests for the gain sweep and model comparison experiments.
"""
import csv
import io
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from powerctl.experiments import (
    COMPARISON_COLUMNS, STATUS_OK, STATUS_OVERLOADED, GainSweepSpec, ModelComparisonSpec,
    default_comparison_scenario, energy, run_gain_sweep, run_model_comparison,
)
from powerctl.link_model import Scenario
from powerctl.power_model import model_from_preset
from powerctl.validators import ValidationError


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestGainSweepSpec:
    """Test sweep grid construction."""

    def test_grid_count(self):
        """Test 0:40 in 1 dB steps has 41 points."""
        assert len(GainSweepSpec().grid()) == 41

    def test_single_point(self):
        """Test 0:0 is a single point."""
        assert list(GainSweepSpec(sweep_range_db=(0.0, 0.0)).grid()) == [0.0]

    def test_step_not_dividing_range(self):
        """Test the last point never overshoots the range."""
        grid = GainSweepSpec(sweep_range_db=(0.0, 10.0), step_db=3.0).grid()
        assert list(grid) == [0.0, 3.0, 6.0, 9.0]

    def test_reversed_range(self):
        """Test lo > hi is rejected."""
        with pytest.raises(ValidationError):
            GainSweepSpec(sweep_range_db=(5.0, 0.0))

    def test_scenario_degrades_first_link(self):
        """Test link 1 sits delta below the fixed gain."""
        scenario = GainSweepSpec(n_links=3).scenario_at(10.0)
        assert scenario.n_links == 3
        assert scenario.links[0].gain_linear == pytest.approx(1e-11, rel=1e-12)
        assert scenario.links[2].gain_linear == pytest.approx(1e-10, rel=1e-12)

    def test_columns(self):
        """Test column layout for two links."""
        assert GainSweepSpec().columns() == (
            'delta_g_db', 'gain_1_db', 'gain_fixed_db', 'mu_1', 'mu_2', 'p_1_w', 'p_2_w',
            'p_1_dbm', 'p_2_dbm', 'delta_p_db', 'p_sys_w', 'status',
        )


class TestGainSweep:
    """Test the gain gap sweep."""

    def test_zero_gap_row(self):
        """Test equal channels give equal powers."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(0.0, 0.0)))
        assert len(result) == 1
        row = result.rows[0]
        assert row['status'] == STATUS_OK
        assert row['delta_p_db'] == 0.0
        assert row['mu_1'] == 0.5

    def test_joint_increase_across_rows(self):
        """Test both powers rise, link 1 gains time and link 2 loses it at every 1 dB step."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(0.0, 40.0), step_db=1.0))
        assert len(result) == 41
        assert len(result.flagged) == 0
        assert np.all(np.diff(result.column('p_1_w')) > 0)
        assert np.all(np.diff(result.column('p_2_w')) > 0)
        assert np.all(np.diff(result.column('mu_1')) > 0)
        assert np.all(np.diff(result.column('mu_2')) <= 0)
        assert result.rows[0]['mu_1'] == pytest.approx(0.5, abs=1e-9)
        assert result.rows[0]['delta_p_db'] == 0.0

    def test_model_cap_flags_rows(self):
        """Test a femto model caps powers and flags the gaps it cannot carry."""
        model = model_from_preset('femto')
        spec = GainSweepSpec(sweep_range_db=(0.0, 40.0), step_db=10.0, model=model)
        result = run_gain_sweep(spec)
        statuses = [row['status'] for row in result.rows]
        assert statuses == [STATUS_OK, STATUS_OK] + [STATUS_OVERLOADED] * 3
        for row in result.rows[:2]:
            assert max(row['p_1_w'], row['p_2_w']) <= model.p_max_w * (1.0 + 1e-9)
            assert row['p_supply_w'] > model.p0_w

    def test_zero_rate_rejected(self):
        """Test a zero sweep rate is rejected up front."""
        with pytest.raises(ValidationError, match="rate_bps"):
            GainSweepSpec(rate_bps=0.0)

    def test_power_gap_narrower_than_gain_gap(self):
        """Test the power gap grows but stays below the gain gap."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(10.0, 40.0), step_db=10.0))
        delta_g = result.column('delta_g_db')
        delta_p = result.column('delta_p_db')
        assert np.all(delta_p > 0)
        assert np.all(delta_p < delta_g)
        assert np.all(np.diff(delta_p) > 0)

    def test_more_links(self):
        """Test unchanged links share the remaining time equally."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(10.0, 10.0), n_links=3, rate_bps=1e6))
        row = result.rows[0]
        assert row['mu_2'] == pytest.approx(row['mu_3'], rel=1e-9)
        assert row['mu_1'] + row['mu_2'] + row['mu_3'] == pytest.approx(1.0, abs=1e-9)

    def test_supply_column(self):
        """Test a power model adds p_supply_w."""
        spec = GainSweepSpec(sweep_range_db=(0.0, 2.0), model=model_from_preset('macro'))
        result = run_gain_sweep(spec)
        assert 'p_supply_w' in result.columns
        assert all(row['p_supply_w'] > row['p_sys_w'] for row in result.rows)

    def test_overloaded_rows_flagged(self):
        """Test infeasible grid points are flagged with empty results."""
        spec = GainSweepSpec(sweep_range_db=(0.0, 1.0), p_max_w=1e-6)
        result = run_gain_sweep(spec)
        assert len(result) == 2
        assert all(row['status'] == STATUS_OVERLOADED for row in result.rows)
        assert math.isnan(result.rows[0]['mu_1'])
        assert result.rows[1]['delta_g_db'] == 1.0

    def test_workers_preserve_order(self):
        """Test parallel evaluation yields the same rows."""
        spec = GainSweepSpec(sweep_range_db=(0.0, 6.0), step_db=2.0)
        assert run_gain_sweep(spec, workers=3).rows == run_gain_sweep(spec).rows


class TestSweepResultOutput:
    """Test tabular output of sweep results."""

    def test_csv_layout(self):
        """Test header, row count and numeric formatting."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(0.0, 2.0)))
        text = result.to_csv()
        lines = text.splitlines()
        assert lines[0] == ','.join(result.columns)
        assert len(lines) == 4
        assert '\r' not in text
        rows = read_csv(text)
        assert float(rows[1]['delta_g_db']) == 1.0
        assert rows[0]['status'] == 'ok'

    def test_flagged_cells_empty(self):
        """Test NaN result cells print empty in CSV and None in records."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(0.0, 0.0), p_max_w=1e-6))
        assert read_csv(result.to_csv())[0]['mu_1'] == ''
        assert result.to_records()[0]['mu_1'] is None

    def test_frame(self):
        """Test the DataFrame view keeps column order."""
        result = run_gain_sweep(GainSweepSpec(sweep_range_db=(0.0, 1.0)))
        assert list(result.to_frame().columns) == list(result.columns)


class TestModelComparison:
    """Test the BS power model comparison."""

    def test_default_scenario(self):
        """Test ten users spread 20 dB down from -100 dB."""
        scenario = default_comparison_scenario()
        assert scenario.n_links == 10
        assert scenario.links[-1].gain_linear == pytest.approx(1e-12, rel=1e-12)

    def test_macro_saves_more_than_femto(self):
        """Test savings shrink as the idle share grows."""
        spec = ModelComparisonSpec.from_presets(['macro', 'femto'], rate_grid=(1e5, 1e6))
        result = run_model_comparison(spec)
        assert result.columns == COMPARISON_COLUMNS
        rows = {(row['label'], row['rate_bps']): row for row in result.rows}
        for rate in (1e5, 1e6):
            assert rows[('macro', rate)]['status'] == STATUS_OK
            assert rows[('macro', rate)]['savings'] > rows[('femto', rate)]['savings'] > 0

    def test_preset_ordering(self):
        """Test savings order femto < pico < micro < macro."""
        result = run_model_comparison(ModelComparisonSpec.from_presets(rate_grid=(1e6,)))
        savings = [row['savings'] for row in result.rows]
        assert savings[0] > savings[1] > savings[2] > savings[3] > 0

    def test_savings_independent_of_load_factor(self):
        """Test l cancels out of the savings figure."""
        one = run_model_comparison(ModelComparisonSpec.from_presets(['micro'], rate_grid=(1e6,)))
        four = run_model_comparison(
            ModelComparisonSpec.from_presets(['micro'], rate_grid=(1e6,), load_factor=4.0)
        )
        assert one.rows[0]['savings'] == pytest.approx(four.rows[0]['savings'], rel=1e-9)

    def test_symmetric_no_savings(self):
        """Test a symmetric cell gains nothing from power control."""
        spec = ModelComparisonSpec.from_presets(
            scenario=default_comparison_scenario(gain_spread_db=0.0), rate_grid=(1e5, 1e6),
        )
        result = run_model_comparison(spec)
        assert all(abs(row['savings']) < 1e-12 for row in result.rows)

    def test_single_row(self):
        """Test one preset and one rate make one row."""
        result = run_model_comparison(ModelComparisonSpec.from_presets(['pico'], rate_grid=(1e6,)))
        assert len(result) == 1
        assert result.rows[0]['label'] == 'pico'

    def test_eta_grid_labels(self):
        """Test explicit eta values get generated labels."""
        result = run_model_comparison(ModelComparisonSpec(eta_grid=(0.25,), rate_grid=(1e6,)))
        assert result.rows[0]['label'] == 'eta=0.25'

    def test_rate_proportional_baseline(self):
        """Test the rate-proportional baseline on equal rates matches equal time."""
        base = ModelComparisonSpec.from_presets(['macro'], rate_grid=(1e6,))
        prop = ModelComparisonSpec.from_presets(['macro'], rate_grid=(1e6,), baseline='rate-proportional')
        assert run_model_comparison(base).rows[0]['savings'] == pytest.approx(
            run_model_comparison(prop).rows[0]['savings'], rel=1e-12)

    def test_overloaded_rate_flagged(self):
        """Test rates beyond the cell's capacity are flagged."""
        result = run_model_comparison(ModelComparisonSpec.from_presets(['macro'], rate_grid=(1e8,)))
        assert result.rows[0]['status'] == STATUS_OVERLOADED
        assert math.isnan(result.rows[0]['savings'])

    def test_savings_approach_tx_savings(self):
        """Test supply savings close in on transmit savings as eta_ld tends to 1."""
        etas = (0.5, 0.9, 0.99, 0.999999, 1.0 - 1e-9)
        result = run_model_comparison(ModelComparisonSpec(eta_grid=etas, rate_grid=(1e6,)))
        tx = result.column('tx_savings')
        gap = tx - result.column('savings')
        assert np.all(gap > 0)
        assert np.all(np.diff(gap) < 0)
        assert gap[-1] < 1e-3 * tx[-1]

    def test_zero_rate_rejected(self):
        """Test rates in the grid must be positive."""
        with pytest.raises(ValidationError, match="rate_bps"):
            ModelComparisonSpec(rate_grid=(0.0,))

    def test_labels_length(self):
        """Test labels must match the eta grid."""
        with pytest.raises(ValidationError, match="labels"):
            ModelComparisonSpec(eta_grid=(0.5, 0.3), labels=('one',))

    def test_unknown_baseline(self):
        """Test the baseline must be known."""
        with pytest.raises(ValidationError, match="Invalid baseline"):
            ModelComparisonSpec(baseline='round-robin')

    def test_unbounded_scenario_rejected(self):
        """Test the comparison needs a finite P_max."""
        bounded = default_comparison_scenario()
        scenario = Scenario(noise=bounded.noise, links=bounded.links)
        with pytest.raises(ValidationError, match="finite P_max"):
            ModelComparisonSpec(scenario=scenario)


class TestEnergy:
    """Test energy accounting."""

    def test_energy(self):
        """Test average power times duration."""
        assert energy(2.0, 3600.0) == 7200.0

    def test_negative_duration(self):
        """Test durations must be non-negative."""
        with pytest.raises(ValidationError):
            energy(2.0, -1.0)
