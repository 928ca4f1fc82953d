import numpy as np
import pytest

from s3fn.cube import load_cube, mean_reflectance
from s3fn.errors import ConfigError, FormatError
from s3fn.patches import build_patch_dataset
from s3fn.pca import fit_pca
from s3fn.synth import (
    SynthSpec,
    default_signatures,
    generate_dataset,
    parse_spec_file,
    write_spec_file,
)


class TestDefaultSignatures:
    def test_separation_contract(self):
        sig = default_signatures(2, 40, 0.2)
        assert np.linalg.norm(sig[0] - sig[1]) >= 0.2 * np.sqrt(40)

    def test_bounded_in_unit_interval(self):
        for u, c, d in [(2, 40, 0.3), (3, 40, 0.2), (2, 16, 0.2)]:
            sig = default_signatures(u, c, d)
            assert sig.min() >= 0.0
            assert sig.max() <= 1.0

    def test_smoothness_scan(self):
        sig = default_signatures(2, 40, 0.3)
        assert np.abs(np.diff(sig, axis=1)).max() < 0.1

    def test_infeasible_separation_rejected(self):
        with pytest.raises(ConfigError):
            default_signatures(2, 40, 0.9)
        with pytest.raises(ConfigError):
            default_signatures(2, 40, -1.0)

    def test_pairwise_distinct_many_classes(self):
        sig = default_signatures(4, 64, 0.15)
        for a in range(4):
            for b in range(a + 1, 4):
                assert np.linalg.norm(sig[a] - sig[b]) >= 0.15 * np.sqrt(64)


def small_spec(**overrides):
    base = dict(
        num_classes=2,
        train_cubes_per_class=3,
        test_cubes_per_class=2,
        height=32,
        width=32,
        bands=24,
        separation=0.25,
        spatial_noise_sd=0.02,
        pixel_mix=0.5,
        seed=11,
    )
    base.update(overrides)
    return SynthSpec(**base)


class TestGenerateDataset:
    def test_zero_noise_gives_exact_signatures(self, tmp_path):
        spec = small_spec(spatial_noise_sd=0.0, train_cubes_per_class=1,
                          test_cubes_per_class=0)
        manifest, labels = generate_dataset(spec, tmp_path)
        sig = default_signatures(2, 24, 0.25)
        for idx, entry in manifest.for_split("train"):
            cube = load_cube(entry.cube_path)
            cls = labels.index_of(entry.label)
            expected = np.broadcast_to(
                sig[cls].astype(np.float32), cube.values.shape
            )
            assert np.array_equal(cube.values, expected)

    def test_seed_determinism_byte_identical(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        generate_dataset(small_spec(), a_dir)
        generate_dataset(small_spec(), b_dir)
        a_files = sorted(p for p in a_dir.rglob("*") if p.is_file())
        b_files = sorted(p for p in b_dir.rglob("*") if p.is_file())
        assert [p.name for p in a_files] == [p.name for p in b_files]
        for pa, pb in zip(a_files, b_files):
            assert pa.read_bytes() == pb.read_bytes(), pa.name

    def test_manifest_layout(self, tmp_path):
        manifest, labels = generate_dataset(small_spec(), tmp_path)
        assert labels.names == ("class_00", "class_01")
        assert len(manifest.for_split("train")) == 6
        assert len(manifest.for_split("test")) == 4
        assert len(manifest.for_split("val")) == 0

    def test_nearest_mean_oracle_separates(self, tmp_path):
        manifest, labels = generate_dataset(
            small_spec(separation=0.3, spatial_noise_sd=0.05, bands=40), tmp_path
        )
        class_sums = {}
        for _, entry in manifest.for_split("train"):
            cls = labels.index_of(entry.label)
            curve = mean_reflectance(load_cube(entry.cube_path)).means
            class_sums.setdefault(cls, []).append(curve)
        class_means = {c: np.mean(v, axis=0) for c, v in class_sums.items()}
        hits = 0
        tests = manifest.for_split("test")
        for _, entry in tests:
            curve = mean_reflectance(load_cube(entry.cube_path)).means
            pred = min(
                class_means, key=lambda c: np.linalg.norm(curve - class_means[c])
            )
            hits += pred == labels.index_of(entry.label)
        assert hits == len(tests)

    def test_low_noise_keeps_spectral_rank_small(self, tmp_path):
        # additive low-rank noise keeps the 99% cut at C' <= U + 3
        spec = small_spec(spatial_noise_sd=0.02, bands=40, separation=0.3)
        manifest, labels = generate_dataset(spec, tmp_path)
        train = build_patch_dataset(manifest, labels, "train")
        model = fit_pca(train.patches, 0.99)
        assert model.reduced_bands <= spec.num_classes + 3


class TestSpecFile:
    def test_round_trip(self, tmp_path):
        spec = small_spec()
        path = tmp_path / "spec.txt"
        write_spec_file(spec, path)
        again = parse_spec_file(path)
        for key in ("num_classes", "height", "bands", "seed"):
            assert getattr(again, key) == getattr(spec, key)
        assert again.spatial_noise_sd == spec.spatial_noise_sd

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text("num_classes=2\nwhatever=1\n")
        with pytest.raises(ConfigError):
            parse_spec_file(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text("num_classes=two\n")
        with pytest.raises(FormatError):
            parse_spec_file(path)

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text("# a comment\n\nnum_classes=3\nbands=30\n")
        spec = parse_spec_file(path)
        assert spec.num_classes == 3
        assert spec.bands == 30

    def test_invalid_spec_values(self):
        with pytest.raises(ConfigError):
            SynthSpec(num_classes=1)
        with pytest.raises(ConfigError):
            SynthSpec(pixel_mix=1.5)
        with pytest.raises(ConfigError):
            SynthSpec(spatial_noise_sd=-0.1)
