"""End-to-end CLI coverage on a deliberately tiny dataset.

Cubes are 16x16 with 16 bands and an 8-pixel patch grid so every stage
finishes in seconds; the full-size configuration is exercised by the
acceptance suite.
"""

import numpy as np
import pytest

from s3fn.cli import main
from s3fn.cube import LabelSet, load_cube, mean_reflectance, save_cube, HsiCube
from s3fn.embeddings import save_embeddings, synth_orthogonal_embeddings
from s3fn.metrics import read_report


SPEC = """\
num_classes=2
train_cubes_per_class=3
test_cubes_per_class=2
val_cubes_per_class=0
height=16
width=16
bands=16
separation=0.2
spatial_noise_sd=0.02
pixel_mix=0.5
seed=5
"""


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run synth -> pca -> pretrain -> fuse -> eval once and share the dirs."""
    root = tmp_path_factory.mktemp("cli")
    spec_path = root / "spec.txt"
    spec_path.write_text(SPEC)
    data = root / "data"
    run = root / "run"
    emb_path = root / "emb.txt"
    save_embeddings(
        synth_orthogonal_embeddings(LabelSet(("class_00", "class_01")), 8, seed=5),
        emb_path,
    )
    manifest = str(data / "manifest.csv")
    assert main(["synth", "--spec", str(spec_path), "--out", str(data)]) == 0
    assert main(["pca", "--manifest", manifest, "--out", str(run),
                 "--patch-size", "8"]) == 0
    assert main(["pretrain", "--manifest", manifest, "--out", str(run),
                 "--patch-size", "8", "--epochs", "2", "--seed", "5"]) == 0
    assert main(["fuse", "--manifest", manifest, "--out", str(run),
                 "--mode", "full_s3fn", "--embeddings", str(emb_path),
                 "--patch-size", "8", "--epochs", "2", "--seed", "5"]) == 0
    assert main(["eval", "--manifest", manifest, "--out", str(run)]) == 0
    return root, data, run, emb_path


class TestPipeline:
    def test_artifacts_exist(self, pipeline):
        _, data, run, _ = pipeline
        for name in ("pca.txt", "pca.meta", "labels.txt", "backbone.txt",
                     "pretrain.meta", "head.txt", "fuse.meta",
                     "embeddings.txt", "report.kv", "report.txt", "eval.meta"):
            assert (run / name).exists(), name
        assert (data / "manifest.csv").exists()
        assert (data / "synth.meta").exists()

    def test_machine_report_parses(self, pipeline):
        _, _, run, _ = pipeline
        report = read_report(run / "report.kv")
        assert report.metadata["mode"] == "full_s3fn"
        assert 0.0 <= report.accuracy <= 1.0
        assert report.confusion.total == 4

    def test_meta_has_no_absolute_paths(self, pipeline):
        root, _, run, _ = pipeline
        for name in ("pretrain.meta", "fuse.meta", "eval.meta", "pca.meta"):
            assert str(root) not in (run / name).read_text()

    def test_eval_standalone_mode(self, pipeline):
        root, data, run, _ = pipeline
        manifest = str(data / "manifest.csv")
        prefix = run / "report_sa"
        assert main(["eval", "--manifest", manifest, "--out", str(run),
                     "--mode", "standalone_cnn",
                     "--report-prefix", str(prefix)]) == 0
        report = read_report(prefix.with_suffix(".kv"))
        assert report.metadata["mode"] == "standalone_cnn"
        assert report.metadata["encoder"] == "none"

    def test_eval_mode_mismatch_rejected(self, pipeline):
        _, data, run, _ = pipeline
        manifest = str(data / "manifest.csv")
        assert main(["eval", "--manifest", manifest, "--out", str(run),
                     "--mode", "label_only"]) == 2

    def test_pca_rerun_is_byte_identical(self, pipeline):
        root, data, run, _ = pipeline
        manifest = str(data / "manifest.csv")
        again = root / "run2"
        assert main(["pca", "--manifest", manifest, "--out", str(again),
                     "--patch-size", "8"]) == 0
        assert (again / "pca.txt").read_bytes() == (run / "pca.txt").read_bytes()
        assert (again / "labels.txt").read_bytes() == (run / "labels.txt").read_bytes()

    def test_eval_warns_when_standalone_gets_embeddings(self, pipeline, caplog):
        import logging

        _, data, run, emb = pipeline
        manifest = str(data / "manifest.csv")
        with caplog.at_level(logging.WARNING):
            assert main(["eval", "--manifest", manifest, "--out", str(run),
                         "--mode", "standalone_cnn", "--embeddings", str(emb),
                         "--report-prefix", str(run / "report_sa2")]) == 0
        assert "ignores" in caplog.text

    def test_synth_seed_override(self, pipeline, tmp_path):
        root, data, _, _ = pipeline
        spec_path = root / "spec.txt"
        other = tmp_path / "other"
        assert main(["synth", "--spec", str(spec_path), "--out", str(other),
                     "--seed", "99"]) == 0
        name = "cubes/train_class_00_000.hsc"
        assert (other / name).read_bytes() != (data / name).read_bytes()
        meta = (other / "synth.meta").read_text()
        assert "seed=99" in meta


class TestErrorPaths:
    def test_unknown_flag_fails_fast(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--spec", "x", "--out", "y", "--frobnicate"])
        assert exc.value.code == 2

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_fuse_without_embeddings_is_usage_error(self, pipeline):
        _, data, run, _ = pipeline
        manifest = str(data / "manifest.csv")
        assert main(["fuse", "--manifest", manifest, "--out", str(run),
                     "--mode", "full_s3fn"]) == 2

    def test_fuse_standalone_mode_is_usage_error(self, pipeline):
        _, data, run, emb = pipeline
        manifest = str(data / "manifest.csv")
        assert main(["fuse", "--manifest", manifest, "--out", str(run),
                     "--mode", "standalone_cnn", "--embeddings", str(emb)]) == 2

    def test_pretrain_without_pca_names_prior_command(self, pipeline, tmp_path, caplog):
        _, data, _, _ = pipeline
        manifest = str(data / "manifest.csv")
        code = main(["pretrain", "--manifest", manifest, "--out", str(tmp_path)])
        assert code == 3
        assert "s3fn pca" in caplog.text

    def test_bad_spec_file(self, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text("num_classes=2\nbogus_key=1\n")
        assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "o")]) == 2

    def test_bad_manifest_is_data_error(self, tmp_path):
        bad = tmp_path / "m.csv"
        bad.write_text("not,a,manifest,header\n")
        assert main(["pca", "--manifest", str(bad), "--out", str(tmp_path / "r")]) == 3


class TestConfigFile:
    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("epochs=7\nseed=1\nbatch_size=2\n")
        from s3fn.cli import build_parser, _resolve_options

        args = build_parser().parse_args(
            ["pretrain", "--manifest", "m", "--out", "o",
             "--config", str(cfg), "--epochs", "3"]
        )
        options = _resolve_options(args)
        assert options["epochs"] == 3  # flag wins
        assert options["seed"] == 1  # config wins over default
        assert options["batch_size"] == 2
        assert options["lr"] == pytest.approx(1e-3)  # default

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("not_a_key=3\n")
        assert main(["pca", "--manifest", "m", "--out", str(tmp_path),
                     "--config", str(cfg)]) == 2

    def test_defaults_follow_reference_setup(self):
        from s3fn.cli import _DEFAULTS

        assert _DEFAULTS["epochs"] == 100
        assert _DEFAULTS["batch_size"] == 4
        assert _DEFAULTS["lambda"] == pytest.approx(1e-2)
        assert _DEFAULTS["dropout"] == pytest.approx(0.5)
        assert _DEFAULTS["patch_size"] == 32
        assert _DEFAULTS["variance_target"] == pytest.approx(0.99)
        assert _DEFAULTS["augment_lo"] == pytest.approx(0.9)
        assert _DEFAULTS["augment_hi"] == pytest.approx(1.1)


class TestReflectance:
    def test_constant_cube_rows(self, tmp_path):
        cube = HsiCube(values=np.full((4, 4, 6), 0.5, dtype=np.float32))
        path = tmp_path / "c.hsc"
        save_cube(cube, path)
        out = tmp_path / "curve.csv"
        assert main(["reflectance", "--cube", str(path), "--out", str(out)]) == 0
        rows = out.read_text().strip().splitlines()
        assert len(rows) == 6  # one row per band
        for band, row in enumerate(rows):
            idx, value = row.split(",")
            assert int(idx) == band
            assert float(value) == pytest.approx(0.5)

    def test_matches_library_means(self, tmp_path):
        rng = np.random.default_rng(8)
        cube = HsiCube(values=rng.random((5, 7, 4)).astype(np.float32))
        path = tmp_path / "c.hsc"
        save_cube(cube, path)
        out = tmp_path / "curve.csv"
        assert main(["reflectance", "--cube", str(path), "--out", str(out)]) == 0
        got = np.array([float(r.split(",")[1]) for r in out.read_text().splitlines()])
        expected = mean_reflectance(load_cube(path)).means
        assert np.allclose(got, expected, atol=1e-6)

    def test_missing_cube_is_data_error(self, tmp_path):
        assert main(["reflectance", "--cube", str(tmp_path / "no.hsc"),
                     "--out", str(tmp_path / "o.csv")]) == 3
