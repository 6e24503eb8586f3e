import logging

import numpy as np
import pytest

from stepflow.config import RunConfig, parse_config
from stepflow.errors import ConfigError
from stepflow.harness import table_configs

MINIMAL = """
re = 4667
tau = 0.05
h_over_H = 0.5
L = 5
hx = 0.00833
T0 = 120
"""


class TestParse:
    def test_minimal_file_reproduces_published_run(self):
        cfg = parse_config(MINIMAL)
        reference = next(c for c in table_configs() if c.label == "t1r4")
        for attr in ("re", "tau", "step_height_ratio", "channel_length",
                     "hx", "t_end", "dt", "field_interval", "probe_interval",
                     "probes"):
            assert getattr(cfg, attr) == getattr(reference, attr), attr

    def test_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.dt == 1e-4
        assert cfg.field_interval == 0.5
        assert cfg.probe_interval == 0.05
        assert cfg.step_x == 0.0
        assert len(cfg.probes) == 4

    def test_sections_and_comments(self):
        cfg = parse_config("""
# physics block
[physics]
re = 1667        # medium Reynolds number
tau = 0.02
[geometry]
h_over_H = 0.33
L = 6
[numerics]
hx = 0.0125
T0 = 160
[probes]
a = 1.5, 0.7
b = 2.5, 0.7
""")
        assert cfg.re == 1667
        assert cfg.probes == ((1.5, 0.7), (2.5, 0.7))

    def test_unknown_key_with_line_number(self):
        with pytest.raises(ConfigError, match=r"line 3: unknown key 'taw'"):
            parse_config("re = 100\ntau = 0.05\ntaw = 0.1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match=r"line 1: unknown section"):
            parse_config("[turbulence]\nre = 100\n")

    def test_non_numeric_value_with_line_number(self):
        with pytest.raises(ConfigError, match=r"line 2: non-numeric value"):
            parse_config("re = 100\ntau = fast\n")

    def test_missing_required_keys(self):
        with pytest.raises(ConfigError, match="missing required keys"):
            parse_config("re = 100\ntau = 0.05\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match=r"duplicate key 're'"):
            parse_config("re = 100\nre = 200\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match=r"line 1"):
            parse_config("just some words\n")

    def test_tau_zero_rejected(self):
        with pytest.raises(ConfigError, match="strictly positive"):
            parse_config(MINIMAL.replace("tau = 0.05", "tau = 0"))

    def test_tau_above_one_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="stepflow.config"):
            cfg = parse_config(MINIMAL.replace("tau = 0.05", "tau = 2.0"))
        assert cfg.tau == 2.0  # parsed despite the heuristic violation
        assert any("tau <= 1" in r.message for r in caplog.records)

    def test_tiny_tau_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="stepflow.config"):
            parse_config(MINIMAL.replace("tau = 0.05", "tau = 1e-8"))
        assert any("perturbation-spreading" in r.message
                   for r in caplog.records)

    def test_misaligned_recording_rejected(self):
        # 0.05003 is not a whole number of 1e-4 steps
        text = MINIMAL + "probe_interval = 0.05003\n"
        with pytest.raises(ConfigError, match="align"):
            parse_config(text)

    def test_avg_window_needs_both_bounds(self):
        with pytest.raises(ConfigError, match="avg_t1 and avg_t2"):
            parse_config(MINIMAL + "avg_t1 = 10\n")


class TestRoundTrip:
    def test_serialize_parse_identity(self):
        for cfg in table_configs():
            again = parse_config(cfg.to_text())
            assert again == cfg
            assert again.config_hash() == cfg.config_hash()

    def test_hash_differs_on_any_change(self):
        cfg = parse_config(MINIMAL)
        other = parse_config(MINIMAL.replace("tau = 0.05", "tau = 0.051"))
        assert cfg.config_hash() != other.config_hash()

    def test_float_values_roundtrip_exactly(self):
        cfg = parse_config(MINIMAL.replace("hx = 0.00833",
                                           "hx = 0.008330000000000001"))
        again = parse_config(cfg.to_text())
        assert again.hx == cfg.hx


class TestDerivedBuilders:
    def test_grid_and_params(self):
        cfg = parse_config(MINIMAL)
        grid = cfg.make_grid()
        assert (grid.ny, grid.nx) == (120, 600)
        params = cfg.make_params(grid)
        assert params.nu == pytest.approx(0.5 / 4667.0)

    def test_default_averaging_window_is_trailing_half(self):
        cfg = parse_config(MINIMAL)
        assert cfg.averaging_window() == (70.0, 120.0)  # capped at 50 units

    def test_explicit_averaging_window(self):
        cfg = parse_config(MINIMAL + "avg_t1 = 40\navg_t2 = 120\n")
        assert cfg.averaging_window() == (40.0, 120.0)

    def test_rescaled_desk_variant(self):
        cfg = parse_config(MINIMAL)
        desk = cfg.rescaled(t0_factor=0.25, coarsen=2)
        assert desk.t_end == 30.0
        assert desk.hx == pytest.approx(0.01666)
        assert desk.re == cfg.re
