"""Synthetic hyperspectral datasets with class-conditioned spectral curves.

Each class gets a smooth signature (a 0.5 baseline plus three Gaussian
bumps in class-specific band slots, alternating sign) so the task is
spectrally, not spatially, discriminative. Pixels of a cube are the class
signature plus two low-rank perturbations: a spatially random, spectrally
flat offset (sd = spatial_noise_sd), and, on a pixel_mix fraction of
pixels, a multiplicative jitter along the signature itself. Keeping the
noise low-rank keeps the number of principal spectral components close to
the number of classes instead of smearing variance over every band.

Everything is deterministic from the seed; per-cube generators are derived
from (seed, cube index) so cubes are independent of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cube import (
    DatasetManifest,
    HsiCube,
    LabelSet,
    ManifestEntry,
    save_cube,
    save_manifest,
)
from .errors import ConfigError, FormatError, ValidationError

MAX_ADJACENT_STEP = 0.1  # smoothness bound for generated signatures


@dataclass
class SynthSpec:
    """Parameters of one synthetic dataset."""

    num_classes: int = 2
    train_cubes_per_class: int = 15
    test_cubes_per_class: int = 5
    val_cubes_per_class: int = 0
    height: int = 64
    width: int = 64
    bands: int = 40
    separation: float = 0.3
    spatial_noise_sd: float = 0.05
    pixel_mix: float = 0.5
    seed: int = 0
    signatures: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("need at least 2 classes")
        if min(self.height, self.width, self.bands) < 1:
            raise ConfigError("cube dims must be >= 1")
        if self.spatial_noise_sd < 0:
            raise ConfigError("spatial_noise_sd must be >= 0")
        if not 0.0 <= self.pixel_mix <= 1.0:
            raise ConfigError("pixel_mix must be in [0, 1]")
        if min(
            self.train_cubes_per_class,
            self.test_cubes_per_class,
            self.val_cubes_per_class,
        ) < 0:
            raise ConfigError("cube counts must be >= 0")
        if self.signatures is not None:
            sig = np.asarray(self.signatures, dtype=np.float64)
            if sig.shape != (self.num_classes, self.bands):
                raise ConfigError(
                    f"signatures must be ({self.num_classes}, {self.bands}), "
                    f"got {sig.shape}"
                )
            for a in range(self.num_classes):
                for b in range(a + 1, self.num_classes):
                    if np.array_equal(sig[a], sig[b]):
                        raise ValidationError(f"signatures {a} and {b} are identical")
            self.signatures = sig

    def class_names(self) -> LabelSet:
        return LabelSet(tuple(f"class_{u:02d}" for u in range(self.num_classes)))


_SPEC_KEYS = {
    "num_classes": int,
    "train_cubes_per_class": int,
    "test_cubes_per_class": int,
    "val_cubes_per_class": int,
    "height": int,
    "width": int,
    "bands": int,
    "separation": float,
    "spatial_noise_sd": float,
    "pixel_mix": float,
    "seed": int,
}


def parse_spec_file(path: str | Path) -> SynthSpec:
    """Read a key=value spec file; unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _SPEC_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown spec key {key!r}")
        try:
            values[key] = _SPEC_KEYS[key](raw)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad value {raw!r} for {key}")
    return SynthSpec(**values)


def write_spec_file(spec: SynthSpec, path: str | Path) -> None:
    lines = [f"{key}={getattr(spec, key)}" for key in _SPEC_KEYS]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def default_signatures(
    num_classes: int, bands: int, separation: float
) -> np.ndarray:
    """(U, C) smooth curves with pairwise L2 distance >= separation * sqrt(C).

    Classes interleave their bump slots across the spectrum, so curves
    differ in shape everywhere. If the requested separation cannot be met
    inside [0, 1] with the smoothness bound, a ConfigError is raised.
    """
    if separation <= 0:
        raise ConfigError(f"separation must be > 0, got {separation}")
    u, c = num_classes, bands
    grid = np.arange(c, dtype=np.float64)
    for bumps in (3, 2):  # 2 wider bumps when 3 will not fit the band count
        slots = bumps * u
        centers = (np.arange(slots) + 0.5) * c / slots
        sigma = max(1.5, 0.9 * c / slots)
        signs = np.array([1.0, -1.0, 1.0])[:bumps]
        pattern = np.zeros((u, c))
        for cls in range(u):
            for k in range(bumps):
                mu = centers[cls + k * u]
                pattern[cls] += signs[k] * np.exp(-0.5 * ((grid - mu) / sigma) ** 2)
        # One global amplitude must reach the separation target while keeping
        # curves inside [0, 1] and under the adjacent-band smoothness bound.
        dmin = min(
            float(np.linalg.norm(pattern[a] - pattern[b]))
            for a in range(u)
            for b in range(a + 1, u)
        )
        if dmin <= 0:
            continue
        needed = 1.02 * separation * np.sqrt(c) / dmin
        max_step = float(np.abs(np.diff(pattern, axis=1)).max())
        allowed = min(
            0.5 / float(np.abs(pattern).max()),
            0.98 * MAX_ADJACENT_STEP / max_step if max_step > 0 else np.inf,
        )
        if needed <= allowed:
            return 0.5 + needed * pattern
    raise ConfigError(
        f"separation {separation} is not achievable for {u} classes over "
        f"{c} bands within [0, 1] and the smoothness bound"
    )


def _render_cube(
    spec: SynthSpec, signatures: np.ndarray, cls: int, cube_index: int
) -> HsiCube:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, cube_index]))
    h, w = spec.height, spec.width
    jittered = rng.random((h, w)) < spec.pixel_mix
    gain = rng.normal(0.0, spec.spatial_noise_sd, (h, w)) * jittered
    offset = rng.normal(0.0, spec.spatial_noise_sd, (h, w))
    values = signatures[cls] * (1.0 + gain)[..., None] + offset[..., None]
    return HsiCube(values=values.astype(np.float32))


def generate_dataset(
    spec: SynthSpec, out_dir: str | Path
) -> tuple[DatasetManifest, LabelSet]:
    """Write cubes plus manifest.csv under out_dir; byte-deterministic."""
    out_dir = Path(out_dir)
    cubes_dir = out_dir / "cubes"
    cubes_dir.mkdir(parents=True, exist_ok=True)
    signatures = (
        spec.signatures
        if spec.signatures is not None
        else default_signatures(spec.num_classes, spec.bands, spec.separation)
    )
    labels = spec.class_names()
    split_counts = (
        ("train", spec.train_cubes_per_class),
        ("test", spec.test_cubes_per_class),
        ("val", spec.val_cubes_per_class),
    )
    entries = []
    cube_index = 0
    for split, count in split_counts:
        for cls, name in enumerate(labels.names):
            for k in range(count):
                cube = _render_cube(spec, signatures, cls, cube_index)
                path = cubes_dir / f"{split}_{name}_{k:03d}.hsc"
                save_cube(cube, path)
                entries.append(ManifestEntry(cube_path=path, label=name, split=split))
                cube_index += 1
    if not entries:
        raise ConfigError("spec generates zero cubes")
    manifest = DatasetManifest(entries=tuple(entries))
    save_manifest(manifest, out_dir / "manifest.csv")
    return manifest, labels
