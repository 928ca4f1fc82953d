"""Global spectral PCA over pooled training-patch pixels.

Every pixel of every training patch contributes one C-dimensional spectral
row; the principal axes come from an eigendecomposition of the mean-centered
C x C covariance. The reduced band count C' is the smallest k whose
cumulative explained-variance ratio reaches the target (default 99%).

Sign convention for reproducibility: each component row is flipped so its
largest-magnitude entry is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ShapeError
from .patches import Patch

PCA_MAGIC = "s3fn-pca v1"
DEFAULT_VARIANCE_TARGET = 0.99


@dataclass(frozen=True)
class PcaModel:
    """Frozen spectral projection: mean, principal axes, variance ratios."""

    mean: np.ndarray = field(repr=False)  # (C,)
    components: np.ndarray = field(repr=False)  # (C', C), orthonormal rows
    variance_ratios: np.ndarray = field(repr=False)  # (C,), non-increasing
    reduced_bands: int = 0
    variance_target: float | None = None

    @property
    def bands(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class ReducedPatch:
    """A patch projected to C' spectral dimensions, with provenance."""

    values: np.ndarray = field(repr=False)  # (ps, ps, C')
    image_index: int = 0
    patch_index: int = 0
    label: int = 0


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        k = int(np.argmax(np.abs(row)))
        if row[k] < 0:
            row *= -1.0
    return out


def select_reduced_bands(ratios: np.ndarray, variance_target: float) -> int:
    """Smallest k with sum(ratios[:k]) >= variance_target."""
    cumulative = np.cumsum(ratios)
    hits = np.nonzero(cumulative >= variance_target)[0]
    if hits.size == 0:
        # Rounding can leave the final cumulative a hair under 1.0.
        return ratios.shape[0]
    return int(hits[0]) + 1


def fit_pca_pixels(
    pixels: np.ndarray, variance_target: float = DEFAULT_VARIANCE_TARGET
) -> PcaModel:
    """Fit on an (N, C) matrix of spectral rows."""
    if not 0.0 < variance_target <= 1.0:
        raise DataError(f"variance_target must be in (0, 1], got {variance_target}")
    x = np.asarray(pixels, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"pixel matrix must be 2-D (N, C), got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise DataError(f"PCA needs at least 2 pixel rows, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    total = eigvals.sum()
    if total <= 0.0:
        raise DataError("pixel matrix has zero total variance")
    ratios = eigvals / total
    axes = _apply_sign_convention(eigvecs[:, order].T)
    c_prime = select_reduced_bands(ratios, variance_target)
    return PcaModel(
        mean=mean,
        components=axes[:c_prime],
        variance_ratios=ratios,
        reduced_bands=c_prime,
        variance_target=variance_target,
    )


def fit_pca(
    train_patches: list[Patch], variance_target: float = DEFAULT_VARIANCE_TARGET
) -> PcaModel:
    """Fit on the pooled pixel spectra of all training patches."""
    if not train_patches:
        raise DataError("cannot fit PCA on an empty patch list")
    bands = train_patches[0].bands
    for p in train_patches:
        if p.bands != bands:
            raise ShapeError("training patches disagree on band count")
    pixels = np.concatenate([p.values.reshape(-1, bands) for p in train_patches])
    return fit_pca_pixels(pixels, variance_target)


def transform(model: PcaModel, patch: Patch) -> ReducedPatch:
    """Project each pixel spectrum to components @ (s - mean)."""
    if patch.bands != model.bands:
        raise ShapeError(
            f"patch has {patch.bands} bands, PCA model expects {model.bands}"
        )
    ps = patch.values.shape[0]
    flat = patch.values.reshape(-1, model.bands) - model.mean
    projected = flat @ model.components.T
    return ReducedPatch(
        values=projected.reshape(ps, ps, model.reduced_bands),
        image_index=patch.image_index,
        patch_index=patch.patch_index,
        label=patch.label,
    )


def explained_variance(model: PcaModel) -> tuple[np.ndarray, np.ndarray]:
    """(ratios, cumulative sums) of the fitted spectrum of variances."""
    ratios = model.variance_ratios
    return ratios, np.cumsum(ratios)


def _fmt(values: np.ndarray) -> str:
    return ",".join(repr(v) for v in values.tolist())


def save_pca(model: PcaModel, path: str | Path) -> None:
    lines = [
        PCA_MAGIC,
        f"C={model.bands} Cprime={model.reduced_bands}",
        _fmt(model.mean),
    ]
    lines.extend(_fmt(row) for row in model.components)
    lines.append(_fmt(model.variance_ratios))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pca(path: str | Path) -> PcaModel:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != PCA_MAGIC:
        raise FormatError(f"{path}: missing '{PCA_MAGIC}' header")
    try:
        dims = dict(kv.split("=") for kv in lines[1].split())
        c, c_prime = int(dims["C"]), int(dims["Cprime"])
    except (IndexError, KeyError, ValueError):
        raise FormatError(f"{path}: malformed dimension line")
    expected = 3 + c_prime
    if len(lines) < expected:
        raise FormatError(f"{path}: expected {expected} lines, found {len(lines)}")

    def parse(line: str, n: int, what: str) -> np.ndarray:
        vals = np.array([float(v) for v in line.split(",")], dtype=np.float64)
        if vals.shape[0] != n:
            raise FormatError(f"{path}: {what} has {vals.shape[0]} values, want {n}")
        return vals

    mean = parse(lines[2], c, "mean")
    components = np.stack(
        [parse(lines[3 + i], c, f"component {i}") for i in range(c_prime)]
    )
    ratios = parse(lines[3 + c_prime], c, "variance ratios")
    return PcaModel(
        mean=mean,
        components=components,
        variance_ratios=ratios,
        reduced_bands=c_prime,
    )
