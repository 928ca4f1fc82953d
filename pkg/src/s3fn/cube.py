"""Hyperspectral cube I/O, dataset manifests, and per-band reflectance means.

Cubes live on disk in the HSC format: the ASCII magic ``HSC1``, three
unsigned 32-bit little-endian integers H, W, C, then H*W*C IEEE-754
32-bit little-endian reflectance values in band-sequential order
(flat index = c*H*W + i*W + j). Manifests are UTF-8 CSV with the header
``cube_path,label,split`` and no quoting; paths are resolved relative to
the manifest file's directory.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, TruncationError, ValidationError

HSC_MAGIC = b"HSC1"
MANIFEST_HEADER = "cube_path,label,split"
LABELS_MAGIC = "s3fn-labels v1"
SPLITS = ("train", "test", "val")


@dataclass(frozen=True)
class HsiCube:
    """One hyperspectral image: an (H, W, C) float32 reflectance stack."""

    values: np.ndarray  # (H, W, C), float32, all finite

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValidationError(
                f"cube values must be 3-D (H, W, C), got shape {v.shape}"
            )
        if min(v.shape) < 1:
            raise ValidationError(f"cube dims must all be >= 1, got {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("cube contains non-finite reflectance values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class LabelSet:
    """Ordered distinct class names; position defines the class index."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise ValidationError("label set is empty (zero classes)")
        if any(not n for n in self.names):
            raise ValidationError("label set contains an empty class name")
        if len(set(self.names)) != len(self.names):
            raise ValidationError(f"label set has duplicate names: {self.names}")

    def __len__(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"label {name!r} not in label set {self.names}")


@dataclass(frozen=True)
class ManifestEntry:
    cube_path: Path
    label: str
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    """All (cube, label, split) rows of one dataset, in file order."""

    entries: tuple[ManifestEntry, ...]

    def for_split(self, split: str) -> list[tuple[int, ManifestEntry]]:
        """Entries of one split, paired with their manifest-wide index."""
        if split not in SPLITS:
            raise ValidationError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [(i, e) for i, e in enumerate(self.entries) if e.split == split]


@dataclass(frozen=True)
class SpectralCurve:
    """Per-band mean reflectance of one cube."""

    means: np.ndarray = field(repr=False)  # (C,), float64

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))


def load_cube(path: str | Path) -> HsiCube:
    """Read an HSC file into a validated cube.

    Raises FormatError on a bad magic, TruncationError when the declared
    H*W*C disagrees with the payload length, DataError on non-finite values.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != HSC_MAGIC:
        raise FormatError(f"{path}: not an HSC cube (bad magic)")
    h, w, c = struct.unpack("<III", raw[4:16])
    if h < 1 or w < 1 or c < 1:
        raise FormatError(f"{path}: header declares empty dims ({h}, {w}, {c})")
    expected = 16 + h * w * c * 4
    if len(raw) != expected:
        raise TruncationError(
            f"{path}: payload is {len(raw) - 16} bytes, header implies {expected - 16}"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=16)
    values = flat.reshape(c, h, w).transpose(1, 2, 0)  # band-sequential -> (H, W, C)
    if not np.isfinite(values).all():
        raise DataError(f"{path}: cube contains non-finite values")
    return HsiCube(values=np.ascontiguousarray(values))


def save_cube(cube: HsiCube, path: str | Path) -> None:
    """Write a cube in HSC format; round-trips bit-exactly through load_cube."""
    path = Path(path)
    header = HSC_MAGIC + struct.pack("<III", cube.height, cube.width, cube.bands)
    payload = cube.values.transpose(2, 0, 1).astype("<f4").tobytes()
    path.write_bytes(header + payload)


def load_manifest(path: str | Path) -> tuple[DatasetManifest, LabelSet]:
    """Parse a manifest CSV; the label set order is first-appearance order."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise FormatError(f"{path}: first line must be '{MANIFEST_HEADER}'")
    entries: list[ManifestEntry] = []
    names: list[str] = []
    seen_paths: set[str] = set()
    base = path.parent
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 comma-separated fields")
        cube_path, label, split = (p.strip() for p in parts)
        if split not in SPLITS:
            raise FormatError(
                f"{path}:{lineno}: unknown split {split!r}, expected one of {SPLITS}"
            )
        if not label:
            raise ValidationError(f"{path}:{lineno}: empty label")
        if cube_path in seen_paths:
            raise ValidationError(f"{path}:{lineno}: duplicate cube path {cube_path!r}")
        seen_paths.add(cube_path)
        if label not in names:
            names.append(label)
        resolved = Path(cube_path)
        if not resolved.is_absolute():
            resolved = base / resolved
        entries.append(ManifestEntry(cube_path=resolved, label=label, split=split))
    if not entries:
        raise ValidationError(f"{path}: manifest has no rows (zero classes)")
    return DatasetManifest(entries=tuple(entries)), LabelSet(names=tuple(names))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest CSV with paths relative to the output directory."""
    path = Path(path)
    rows = [MANIFEST_HEADER]
    for e in manifest.entries:
        p = e.cube_path
        try:
            p = p.relative_to(path.parent)
        except ValueError:
            pass
        rendered = p.as_posix()
        if "," in rendered or "," in e.label:
            raise ValidationError("manifest paths and labels must not contain commas")
        rows.append(f"{rendered},{e.label},{e.split}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def save_labels(labels: LabelSet, path: str | Path) -> None:
    Path(path).write_text(
        "\n".join([LABELS_MAGIC, *labels.names]) + "\n", encoding="utf-8"
    )


def load_labels(path: str | Path) -> LabelSet:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != LABELS_MAGIC:
        raise FormatError(f"{path}: missing '{LABELS_MAGIC}' header")
    return LabelSet(names=tuple(n for n in lines[1:] if n.strip()))


def mean_reflectance(cube: HsiCube) -> SpectralCurve:
    """Mean over all H*W pixels of each band."""
    means = cube.values.astype(np.float64).mean(axis=(0, 1))
    return SpectralCurve(means=means)
