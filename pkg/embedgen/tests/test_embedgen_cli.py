import numpy as np
import pytest

from embedgen.cli import main, parse_labels
from embedgen.writer import read_embedding_file


class TestParseLabels:
    def test_comma_list(self):
        assert parse_labels("Heartwood, Sapwood") == ["Heartwood", "Sapwood"]

    def test_manifest_first_appearance_order(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "cube_path,label,split\na.hsc,B,train\nb.hsc,A,train\nc.hsc,B,test\n"
        )
        assert parse_labels(str(manifest)) == ["B", "A"]

    def test_single_label_rejected(self):
        from embedgen.errors import ConfigError

        with pytest.raises(ConfigError):
            parse_labels("Heartwood")

    def test_duplicate_labels_rejected(self):
        from embedgen.errors import ConfigError

        with pytest.raises(ConfigError):
            parse_labels("A,B,A")


class TestCliRuns:
    def test_fixture_mode_end_to_end(self, tmp_path, descriptions_dir, vectors_path):
        out = tmp_path / "emb.txt"
        code = main([
            "--labels", "Heartwood,Sapwood",
            "--source", "fixture", "--fixtures", str(descriptions_dir),
            "--encoder", f"vectors:{vectors_path}",
            "--out", str(out),
        ])
        assert code == 0
        vectors, source = read_embedding_file(out)
        assert set(vectors) == {"Heartwood", "Sapwood"}
        assert vectors["Heartwood"].shape == (50,)
        assert "word_average" in source
        assert "fixture" in source

    def test_two_runs_byte_identical(self, tmp_path, descriptions_dir, vectors_path):
        args = [
            "--labels", "Heartwood,Sapwood",
            "--source", "fixture", "--fixtures", str(descriptions_dir),
            "--encoder", f"vectors:{vectors_path}",
        ]
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        assert main([*args, "--out", str(a)]) == 0
        assert main([*args, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_names_source(self, tmp_path, vectors_path):
        out = tmp_path / "names.txt"
        code = main([
            "--labels", "class_00,class_01",
            "--source", "names",
            "--encoder", f"vectors:{vectors_path}",
            "--out", str(out),
        ])
        assert code == 0
        vectors, source = read_embedding_file(out)
        assert "names" in source
        a, b = vectors["class_00"], vectors["class_01"]
        assert not np.allclose(a, b)

    def test_manifest_labels_input(self, tmp_path, descriptions_dir, vectors_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "cube_path,label,split\na.hsc,Heartwood,train\nb.hsc,Sapwood,test\n"
        )
        out = tmp_path / "emb.txt"
        code = main([
            "--labels", str(manifest),
            "--source", "fixture", "--fixtures", str(descriptions_dir),
            "--encoder", f"vectors:{vectors_path}",
            "--out", str(out),
        ])
        assert code == 0
        vectors, _ = read_embedding_file(out)
        assert list(vectors) == ["Heartwood", "Sapwood"]

    def test_missing_fixture_dir_flag(self, tmp_path, vectors_path):
        code = main([
            "--labels", "A,B", "--source", "fixture",
            "--encoder", f"vectors:{vectors_path}",
            "--out", str(tmp_path / "x.txt"),
        ])
        assert code == 2

    def test_missing_fixture_file(self, tmp_path, vectors_path):
        code = main([
            "--labels", "A,B", "--source", "fixture",
            "--fixtures", str(tmp_path),
            "--encoder", f"vectors:{vectors_path}",
            "--out", str(tmp_path / "x.txt"),
        ])
        assert code == 2

    def test_unknown_encoder(self, tmp_path, descriptions_dir):
        code = main([
            "--labels", "Heartwood,Sapwood",
            "--source", "fixture", "--fixtures", str(descriptions_dir),
            "--encoder", "bogus:nothing",
            "--out", str(tmp_path / "x.txt"),
        ])
        assert code == 2

    def test_unknown_flag_fails_fast(self):
        with pytest.raises(SystemExit) as exc:
            main(["--labels", "A,B", "--frobnicate"])
        assert exc.value.code == 2
