import os

import numpy as np
import pytest

from lfvar.cli import main
from lfvar.config import StudyConfig, build_config, config_hash, load_config, parse_config_text
from lfvar.errors import ConfigError, DegenerateFit
from lfvar.harness import ErrorRow, ErrorTable, build_data, fit_rate, mesh_for, run_study


def table_from(errors, dxs=None):
    dxs = dxs if dxs is not None else [2.0 ** (-k) for k in range(2, 2 + len(errors))]
    return ErrorTable(kind="v-error",
                      rows=[ErrorRow(N=1, dx=d, error=e, runtime=0.0)
                            for d, e in zip(dxs, errors)])


class TestRateFit:
    def test_linear_scaling(self):
        fit = fit_rate(table_from([1e-1, 5e-2, 2.5e-2, 1.25e-2]))
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.stderr == pytest.approx(0.0, abs=1e-10)

    def test_sqrt_scaling(self):
        dxs = [2.0 ** (-k) for k in range(2, 6)]
        fit = fit_rate(table_from([np.sqrt(d) for d in dxs], dxs))
        assert fit.slope == pytest.approx(0.5, abs=1e-12)

    def test_degenerate_pair_no_crash(self):
        fit = fit_rate(table_from([1e-2, 1e-2, 1e-3]))
        assert np.isfinite(fit.slope)
        assert fit.stderr > 0.1

    def test_exact_zero_is_degenerate(self):
        with pytest.raises(DegenerateFit):
            fit_rate(table_from([1e-2, 0.0, 1e-3]))

    def test_needs_three_rows(self):
        with pytest.raises(ValueError):
            fit_rate(table_from([1e-2, 1e-3]))


class TestConfig:
    def test_defaults_validate(self):
        cfg = build_config({})
        assert cfg.study == "v-error"

    def test_unknown_key_carries_line_number(self):
        text = "study = v-error\nbogus = 3\n"
        with pytest.raises(ConfigError) as err:
            parse_config_text(text)
        assert err.value.line == 2
        assert "bogus" in str(err.value)

    def test_malformed_line_reported(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("study v-error\n")
        assert err.value.line == 1

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("T = 0.1\nT = 0.2\n")

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError) as err:
            build_config(parse_config_text("T = fast\n"))
        assert err.value.key == "T"

    def test_choice_validation(self):
        with pytest.raises(ConfigError):
            build_config({}, ["study=sideways"])

    def test_comments_and_blank_lines(self):
        raw = parse_config_text("# a comment\n\nT = 0.2  # trailing\n")
        cfg = build_config(raw)
        assert cfg.T == 0.2

    def test_override_wins(self):
        raw = parse_config_text("T = 0.2\n")
        cfg = build_config(raw, ["T=0.3"])
        assert cfg.T == 0.3

    def test_hash_tracks_content(self):
        a = build_config({}, ["seed=1"])
        b = build_config({}, ["seed=2"])
        assert config_hash(a) != config_hash(b)
        assert config_hash(a) == config_hash(build_config({}, ["seed=1"]))

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "study.cfg"
        path.write_text("study = equivalence\nmesh_ladder = 8, 16\nT = 0.1\n")
        cfg = load_config(path)
        assert cfg.study == "equivalence"
        assert cfg.mesh_ladder == (8, 16)


class TestStudies:
    def test_equivalence_is_exact(self):
        cfg = build_config({}, ["study=equivalence", "mesh_ladder=8,16", "T=0.15"])
        table = run_study(cfg)
        assert all(row.error <= 1e-12 for row in table.rows)

    def test_v_error_rate_at_least_half(self):
        cfg = build_config({}, ["study=v-error", "mesh_ladder=16,32,64", "T=0.1",
                                "sample_nx=32", "sample_nt=16"])
        table = run_study(cfg)
        errs = table.errors()
        assert np.all(np.diff(errs) < 0)
        assert table.rate >= 0.5

    def test_dispersion_zero_field_exact(self):
        cfg = build_config({}, ["study=dispersion", "mesh_ladder=8,16", "depth=6"])
        table = run_study(cfg)
        assert all(abs(row.error) <= 1e-12 for row in table.rows)
        assert table.note in ("exact", "too few rows for a rate")

    def test_table_metadata_reruns_row(self):
        cfg = build_config({}, ["study=equivalence", "mesh_ladder=8", "T=0.1"])
        table = run_study(cfg)
        md = table.metadata
        for key in ("model", "c", "h", "seed", "config_hash", "T", "initial"):
            assert key in md

    def test_csv_determinism(self, tmp_path):
        cfg = build_config({}, ["study=v-error", "mesh_ladder=16,32", "T=0.05",
                                "sample_nx=16", "sample_nt=8"])
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run_study(cfg).to_csv(p1)
        run_study(cfg).to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_runtime_column_optional(self, tmp_path):
        cfg = build_config({}, ["study=equivalence", "mesh_ladder=8", "T=0.05"])
        table = run_study(cfg)
        p = tmp_path / "t.csv"
        table.to_csv(p, include_runtime=True)
        assert "runtime_s" in p.read_text().splitlines()[0]
        table.to_csv(p, include_runtime=False)
        assert "runtime_s" not in p.read_text().splitlines()[0]

    def test_mesh_ladder_respects_scaling_band(self):
        cfg = build_config({}, ["lambda_frac=0.8"])
        mesh = mesh_for(cfg, 16, 0.5)
        assert cfg.lambda0 <= mesh.lam < 0.5
        assert mesh.lam == pytest.approx(0.4, abs=1e-12)


class TestDataSpecs:
    def test_riemann_tent_potential(self):
        cfg = build_config({}, ["initial=riemann-shock"])
        data = build_data(cfg)
        assert data.riemann == (1.0, -1.0)
        assert data.v0_exact(0.25) == pytest.approx(0.25)
        assert data.v0_exact(0.75) == pytest.approx(0.25)

    def test_cosine_consistency(self):
        cfg = build_config({})
        data = build_data(cfg)
        # v0' = u0 by central difference
        step = 1e-6
        for y in (0.1, 0.55):
            fd = (data.v0_exact(y + step) - data.v0_exact(y - step)) / (2 * step)
            assert fd == pytest.approx(float(data.initial.u0(y)), abs=1e-8)


class TestCli:
    def test_verify_exits_zero(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert "slope_bound" in out
        assert "alpha1" in out

    def test_malformed_config_exits_one(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("studyx = 1\n")
        assert main(["study", "-c", str(path)]) == 1
        assert "line 1" in capsys.readouterr().err

    def test_out_of_band_lambda_exits_one(self, tmp_path):
        code = main(["study", "-o", str(tmp_path), "--no-figures",
                     "lambda0=0.49", "mesh_ladder=8", "study=equivalence", "T=0.05"])
        assert code == 1  # scaling-band validation failure

    def test_runtime_stability_violation_exits_two(self, tmp_path, capsys):
        # declaring r below the actual data bound yields a slope cap the
        # first step already exceeds
        code = main(["run", "-o", str(tmp_path), "--no-figures",
                     "initial=riemann-shock", "initial_amplitude=1.2", "r=0.1",
                     "mesh_ladder=8", "T=0.05"])
        assert code == 2
        assert "stability violation" in capsys.readouterr().err

    def test_study_emits_csv_and_figure(self, tmp_path):
        code = main(["study", "-o", str(tmp_path),
                     "study=equivalence", "mesh_ladder=8,16", "T=0.05"])
        assert code == 0
        assert (tmp_path / "study_equivalence.csv").exists()
        assert (tmp_path / "study_equivalence.png").exists()

    def test_no_figures_flag(self, tmp_path):
        code = main(["study", "-o", str(tmp_path), "--no-figures",
                     "study=equivalence", "mesh_ladder=8", "T=0.05"])
        assert code == 0
        assert not (tmp_path / "study_equivalence.png").exists()

    def test_run_emits_fields_and_monitors(self, tmp_path):
        code = main(["run", "-o", str(tmp_path), "--no-figures",
                     "mesh_ladder=8", "T=0.05"])
        assert code == 0
        for name in ("u_final.csv", "v_final.csv", "monitors.csv"):
            assert (tmp_path / name).exists()
        header = (tmp_path / "monitors.csv").read_text().splitlines()[0]
        assert header.startswith("k,t_k,mass,max_slope")

    def test_walk_emits_json(self, tmp_path):
        code = main(["walk", "-o", str(tmp_path), "--no-figures",
                     "mesh_ladder=8", "depth=5", "T=0.05"])
        assert code == 0
        assert (tmp_path / "ensemble.json").exists()

    def test_char_emits_csv(self, tmp_path):
        code = main(["char", "-o", str(tmp_path), "--no-figures",
                     "mesh_ladder=16", "T=0.1", "point=0.3,0.1"])
        assert code == 0
        assert (tmp_path / "characteristic.csv").exists()

    def test_output_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LFVAR_OUTPUT_DIR", str(tmp_path / "envout"))
        code = main(["study", "--no-figures", "study=equivalence", "mesh_ladder=8", "T=0.05"])
        assert code == 0
        assert (tmp_path / "envout" / "study_equivalence.csv").exists()
