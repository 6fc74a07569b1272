import json

import numpy as np
import pytest

from odeflow.cli import main
from odeflow.config import (
    default_config,
    format_config,
    parse_config,
)
from odeflow.errors import ConfigError
from odeflow.evaluation import read_cd_csv
from odeflow.spectral import read_spectral_csv
from odeflow.textio import format_sections, parse_sections


class TestSectionGrammar:
    def test_parses_sections_and_values(self):
        text = "# comment\n[world]\nvariant = xor\n\n[run]\nseed = 4\n"
        got = parse_sections(text)
        assert got["world"]["variant"] == ("xor", 3)
        assert got["run"]["seed"] == ("4", 6)

    def test_line_numbers_on_errors(self):
        cases = [
            ("[world]\nvariant xor\n", 2),
            ("key = 1\n", 1),
            ("[world]\n[world]\n", 2),
            ("[world]\ndim = 2\ndim = 3\n", 3),
            ("[world]\n9key = 1\n", 2),
        ]
        for text, line in cases:
            with pytest.raises(ConfigError) as err:
                parse_sections(text)
            assert err.value.line == line, text

    def test_format_round_trips(self):
        sections = [("world", [("variant", "ring"), ("dim", "3")]), ("run", [("seed", "2")])]
        text = format_sections(sections)
        parsed = parse_sections(text)
        assert parsed["world"]["variant"][0] == "ring"
        assert parsed["run"]["seed"][0] == "2"


class TestParseConfig:
    def test_empty_text_gives_defaults(self):
        cfg = default_config()
        assert cfg.world.variant == "blobs"
        assert cfg.world.dim == 8
        assert cfg.field_kind == "net"
        assert cfg.depth == 1
        assert cfg.attribute == 0
        assert cfg.seed == 0
        assert cfg.train.restarts == 1
        assert cfg.train.accept_loss is None

    def test_values_flow_through(self):
        cfg = parse_config(
            "[world]\nvariant = xor\ndim = 2\nbeta = 5.0\n"
            "[train]\nfield = net\ndepth = 1\niterations = 50\nrestarts = 3\naccept_loss = 2.0\n"
            "[eval]\nsamples = 64\n"
            "[run]\nseed = 9\nout = results\n"
        )
        assert cfg.world.variant == "xor"
        assert cfg.world.dim == 2
        assert cfg.train.iterations == 50
        assert cfg.train.restarts == 3
        assert cfg.train.accept_loss == 2.0
        assert cfg.train.seed == 9
        assert cfg.eval.samples == 64
        assert (cfg.seed, cfg.out) == (9, "results")

    def test_unknown_section_carries_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[world]\nvariant = xor\n[mystery]\nx = 1\n")
        assert err.value.line == 4

    def test_unknown_key_carries_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[world]\nvariant = xor\nwobble = 3\n")
        assert err.value.line == 3

    def test_bad_value_carries_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[world]\ndim = two\n")
        assert err.value.line == 2

    def test_semantic_errors_become_config_errors(self):
        for text in (
            "[world]\nvariant = nope\n",
            "[train]\ndepth = 7\n",
            "[train]\nattribute = 5\n",
            "[train]\nrestarts = 0\n",
            "[run]\nseed = -1\n",
        ):
            with pytest.raises(ConfigError):
                parse_config(text)

    def test_format_parse_round_trip(self):
        texts = [
            "",
            "[world]\nvariant = xor\ndim = 2\n[train]\nrestarts = 2\naccept_loss = 1.5\n",
            "[world]\nvariant = wheel\nsectors = 9\n[train]\nfield = constant\n[spectral]\nk = 2\n",
            "[world]\nvariant = ring\ndim = 3\n[train]\nfield = net\ndepth = 2\nwidth = 5\n",
        ]
        for text in texts:
            cfg = parse_config(text)
            rendered = format_config(cfg)
            assert parse_config(rendered) == cfg
            assert format_config(parse_config(rendered)) == rendered

    def test_with_seed_updates_train_seed(self):
        cfg = default_config().with_seed(17)
        assert cfg.seed == 17
        assert cfg.train.seed == 17


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full CLI run on a tiny config, shared by the assertions below."""
    root = tmp_path_factory.mktemp("run")
    out = root / "out"
    cfg = _write(
        root / "exp.cfg",
        "[world]\nvariant = blobs\ndim = 2\n"
        "[train]\nfield = net\ndepth = 1\niterations = 60\nbatch_size = 8\n"
        "[eval]\nsamples = 48\ntau_grid = 12\ntraj_samples = 16\nsteps = 60\n"
        "[svm]\ncodes = 80\n"
        f"[run]\nseed = 3\nout = {out}\n",
    )
    assert main(["worldgen", "--config", cfg]) == 0
    assert main(["train", "--config", cfg]) == 0
    assert main(["baseline", "--config", cfg]) == 0
    assert main(["eval", "--config", cfg, "model-net1-attr0", "baseline-attr0"]) == 0
    assert main(["analyze", "--config", cfg, "model-net1-attr0"]) == 0
    assert main(["report", "--config", cfg, "cd-model-net1-attr0", "cd-baseline-attr0"]) == 0
    return cfg, out


class TestPipeline:
    def test_artifacts_exist(self, pipeline):
        _, out = pipeline
        for name in (
            "world.cfg",
            "model-net1-attr0.ckpt",
            "model-net1-attr0.meta",
            "baseline-attr0.ckpt",
            "baseline-attr0.meta",
            "cd-model-net1-attr0.csv",
            "cd-baseline-attr0.csv",
            "spectral.csv",
            "report.svg",
            "summary.txt",
            "manifest.json",
        ):
            assert (out / name).exists(), name

    def test_world_cfg_reparses(self, pipeline):
        _, out = pipeline
        sections = parse_sections((out / "world.cfg").read_text())
        assert sections["world"]["variant"][0] == "blobs"
        assert sections["world"]["dim"][0] == "2"

    def test_curves_are_well_formed(self, pipeline):
        _, out = pipeline
        for name in ("cd-model-net1-attr0.csv", "cd-baseline-attr0.csv"):
            curve = read_cd_csv(str(out / name))
            assert curve.taus.shape == (13,)
            assert np.all((curve.control >= 0) & (curve.control <= 1))
            assert np.all((curve.disentanglement >= 0) & (curve.disentanglement <= 1))
            assert curve.disentanglement[0] == 0.0

    def test_spectral_csv_round_trips(self, pipeline):
        _, out = pipeline
        rows = read_spectral_csv(str(out / "spectral.csv"))
        assert len(rows) == 1
        assert rows[0]["attribute"] == 0
        assert rows[0]["k"] >= 1
        assert rows[0]["h_svd"] >= 0.0

    def test_manifest_lists_files_with_hashes(self, pipeline):
        _, out = pipeline
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tool"] == "odeflow"
        assert "world.cfg" in manifest["files"]
        assert "report.svg" in manifest["files"]
        assert all(len(h) == 64 for h in manifest["files"].values())
        assert parse_config(manifest["config"]).world.variant == "blobs"

    def test_summary_mentions_both_models(self, pipeline):
        _, out = pipeline
        text = (out / "summary.txt").read_text()
        assert "model-net1-attr0" in text
        assert "baseline-attr0" in text

    def test_svg_has_one_polyline_per_curve(self, pipeline):
        _, out = pipeline
        svg = (out / "report.svg").read_text()
        assert svg.count("<polyline") == 2

    def test_analyze_of_constant_baseline_fails_cleanly(self, pipeline, capsys):
        cfg, out = pipeline
        assert main(["analyze", "--config", cfg, "baseline-attr0"]) == 2
        assert "odeflow:" in capsys.readouterr().err


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            cfg = _write(
                tmp_path / f"{sub}.cfg",
                "[world]\nvariant = blobs\ndim = 2\n"
                "[train]\nfield = constant\niterations = 40\nbatch_size = 8\n"
                "[eval]\nsamples = 32\ntau_grid = 8\ntraj_samples = 8\nsteps = 40\n"
                f"[run]\nseed = 5\nout = {out}\n",
            )
            assert main(["train", "--config", cfg, "--quiet"]) == 0
            assert main(["eval", "--config", cfg, "--quiet", "model-constant-attr0"]) == 0
            outs.append(out)
        a, b = outs
        for name in ("model-constant-attr0.ckpt", "cd-model-constant-attr0.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_seed_override_changes_artifacts(self, tmp_path):
        out = tmp_path / "o"
        cfg = _write(
            tmp_path / "c.cfg",
            "[world]\nvariant = blobs\ndim = 2\n"
            "[train]\nfield = constant\niterations = 40\nbatch_size = 8\n"
            f"[run]\nseed = 5\nout = {out}\n",
        )
        assert main(["train", "--config", cfg, "--quiet"]) == 0
        first = (out / "model-constant-attr0.ckpt").read_bytes()
        assert main(["train", "--config", cfg, "--quiet", "--seed", "6"]) == 0
        second = (out / "model-constant-attr0.ckpt").read_bytes()
        assert first != second


class TestCliErrors:
    def test_bad_config_exits_1(self, tmp_path, capsys):
        cfg = _write(tmp_path / "bad.cfg", "[world]\nvariant = nope\n")
        assert main(["worldgen", "--config", cfg]) == 1
        assert "odeflow:" in capsys.readouterr().err

    def test_missing_config_file_exits_1(self, tmp_path):
        assert main(["worldgen", "--config", str(tmp_path / "absent.cfg")]) == 1

    def test_eval_before_train_exits_1(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = _write(tmp_path / "c.cfg", f"[run]\nout = {out}\n")
        assert main(["eval", "--config", cfg, "model-net1-attr0"]) == 1
        assert "missing input" in capsys.readouterr().err

    def test_unknown_command_exits_1(self, capsys):
        assert main(["no-such-command"]) == 1
        capsys.readouterr()
