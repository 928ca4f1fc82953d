"""Non-overlapping spatial patching of cubes and intensity augmentation.

Patches tile the top-left floor(H/ps)*ps x floor(W/ps)*ps region of a cube
in row-major order; the remainder border is discarded. Every patch inherits
its parent image's class label. Augmentation multiplies a whole patch by a
single scalar drawn uniformly from [lo, hi] (global intensity jitter only;
per-band jitter would distort spectral shape).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cube import DatasetManifest, HsiCube, LabelSet, load_cube
from .errors import ConfigError, ShapeError, ValidationError

DEFAULT_PATCH_SIZE = 32


@dataclass(frozen=True)
class Patch:
    """A ps x ps x C tile of one cube, carrying its provenance."""

    values: np.ndarray = field(repr=False)  # (ps, ps, C), float64
    image_index: int = 0
    patch_index: int = 0
    label: int = 0
    origin: tuple[int, int] = (0, 0)  # top-left (row, col) in the parent cube

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] != v.shape[1]:
            raise ShapeError(f"patch must be square (ps, ps, C), got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def bands(self) -> int:
        return self.values.shape[2]


@dataclass
class PatchDataset:
    """All patches of one split, plus the image -> patch-index bookkeeping."""

    patches: list[Patch]
    split: str
    per_image_index: dict[int, list[int]]

    def __len__(self) -> int:
        return len(self.patches)

    @property
    def labels(self) -> np.ndarray:
        return np.array([p.label for p in self.patches], dtype=np.int64)


def extract_patches(
    cube: HsiCube,
    patch_size: int = DEFAULT_PATCH_SIZE,
    *,
    image_index: int = 0,
    label: int = 0,
) -> list[Patch]:
    """Tile a cube into floor(H/ps)*floor(W/ps) disjoint patches (row-major)."""
    if patch_size < 1:
        raise ConfigError(f"patch_size must be >= 1, got {patch_size}")
    h, w = cube.height, cube.width
    if h < patch_size or w < patch_size:
        raise ShapeError(
            f"cube {h}x{w} is smaller than one {patch_size}x{patch_size} patch"
        )
    n_rows, n_cols = h // patch_size, w // patch_size
    values = cube.values.astype(np.float64)
    out: list[Patch] = []
    for r in range(n_rows):
        for c in range(n_cols):
            i0, j0 = r * patch_size, c * patch_size
            out.append(
                Patch(
                    values=values[i0 : i0 + patch_size, j0 : j0 + patch_size, :],
                    image_index=image_index,
                    patch_index=r * n_cols + c,
                    label=label,
                    origin=(i0, j0),
                )
            )
    return out


def augment_scale(
    patch: Patch, rng: np.random.Generator, lo: float = 0.9, hi: float = 1.1
) -> Patch:
    """Scale every value by one alpha ~ Uniform[lo, hi]; metadata unchanged."""
    if lo > hi:
        raise ConfigError(f"augment bounds require lo <= hi, got ({lo}, {hi})")
    alpha = float(rng.uniform(lo, hi))
    return Patch(
        values=patch.values * alpha,
        image_index=patch.image_index,
        patch_index=patch.patch_index,
        label=patch.label,
        origin=patch.origin,
    )


def build_patch_dataset(
    manifest: DatasetManifest,
    labels: LabelSet,
    split: str,
    patch_size: int = DEFAULT_PATCH_SIZE,
) -> PatchDataset:
    """Load every cube of one split and patch it; labels become class indices.

    Image indices refer to positions in the full manifest so they stay
    stable across splits. An empty result is allowed (logged by callers
    that cannot proceed without data).
    """
    patches: list[Patch] = []
    per_image: dict[int, list[int]] = {}
    for image_index, entry in manifest.for_split(split):
        if entry.label not in labels.names:
            raise ValidationError(
                f"manifest label {entry.label!r} not in label set {labels.names}"
            )
        cube = load_cube(entry.cube_path)
        cls = labels.index_of(entry.label)
        cube_patches = extract_patches(
            cube, patch_size, image_index=image_index, label=cls
        )
        start = len(patches)
        patches.extend(cube_patches)
        per_image[image_index] = list(range(start, len(patches)))
    return PatchDataset(patches=patches, split=split, per_image_index=per_image)
