"""Semantic label embeddings: the portable text format and fixtures.

One embedding file carries a d-dimensional vector per class name. Files are
UTF-8 with LF endings: the magic line ``s3fn-embeddings v1``, then
``dim=<d>``, then ``source=<tag>``, then one ``<class name>\\t<values>``
row per class with comma-separated decimals at full float64 precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cube import LabelSet
from .errors import ConfigError, DataError, FormatError, ValidationError

EMBEDDINGS_MAGIC = "s3fn-embeddings v1"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelEmbeddingSet:
    """Ordered class name -> vector mapping with a provenance tag."""

    dim: int
    entries: dict[str, np.ndarray] = field(repr=False)
    source_tag: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"embedding dim must be >= 1, got {self.dim}")
        if not self.entries:
            raise ValidationError("embedding set has no classes")
        for name, vec in self.entries.items():
            if not name:
                raise ValidationError("embedding set contains an empty class name")
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (self.dim,):
                raise ValidationError(
                    f"class {name!r} vector has shape {v.shape}, expected ({self.dim},)"
                )
            if not np.isfinite(v).all():
                raise DataError(f"class {name!r} vector has non-finite values")
            self.entries[name] = v

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def matrix(self, labels: LabelSet) -> np.ndarray:
        """(U, d) matrix with rows in label-set order."""
        validate_against_labels(self, labels)
        return np.stack([self.entries[name] for name in labels.names])

    def scaled(self, alpha: float) -> "LabelEmbeddingSet":
        return LabelEmbeddingSet(
            dim=self.dim,
            entries={k: v * alpha for k, v in self.entries.items()},
            source_tag=self.source_tag,
        )

    def normalized(self) -> "LabelEmbeddingSet":
        """Unit-norm variant (optional experiment; raw vectors are the default)."""
        out = {}
        for name, v in self.entries.items():
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                raise DataError(f"class {name!r} vector has zero norm")
            out[name] = v / norm
        return LabelEmbeddingSet(
            dim=self.dim, entries=out, source_tag=self.source_tag + "+l2norm"
        )


def load_embeddings(path: str | Path) -> LabelEmbeddingSet:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 4 or lines[0] != EMBEDDINGS_MAGIC:
        raise FormatError(f"{path}: missing '{EMBEDDINGS_MAGIC}' header")
    if not lines[1].startswith("dim="):
        raise FormatError(f"{path}: second line must be 'dim=<d>'")
    if not lines[2].startswith("source="):
        raise FormatError(f"{path}: third line must be 'source=<tag>'")
    try:
        dim = int(lines[1][len("dim=") :])
    except ValueError:
        raise FormatError(f"{path}: malformed dim value {lines[1]!r}")
    source = lines[2][len("source=") :]
    entries: dict[str, np.ndarray] = {}
    for lineno, row in enumerate(lines[3:], start=4):
        if not row.strip():
            continue
        if "\t" not in row:
            raise FormatError(f"{path}:{lineno}: expected '<name>\\t<values>'")
        name, payload = row.split("\t", 1)
        if name in entries:
            raise ValidationError(f"{path}:{lineno}: duplicate class {name!r}")
        try:
            vec = np.array([float(v) for v in payload.split(",")], dtype=np.float64)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: unparseable vector values")
        if vec.shape[0] != dim:
            raise FormatError(
                f"{path}:{lineno}: row has {vec.shape[0]} values, header says {dim}"
            )
        if not np.isfinite(vec).all():
            raise DataError(f"{path}:{lineno}: non-finite value in vector")
        entries[name] = vec
    return LabelEmbeddingSet(dim=dim, entries=entries, source_tag=source)


def save_embeddings(embeddings: LabelEmbeddingSet, path: str | Path) -> None:
    lines = [
        EMBEDDINGS_MAGIC,
        f"dim={embeddings.dim}",
        f"source={embeddings.source_tag}",
    ]
    for name, vec in embeddings.entries.items():
        lines.append(name + "\t" + ",".join(map(repr, vec.tolist())))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_against_labels(
    embeddings: LabelEmbeddingSet, labels: LabelSet
) -> None:
    """Succeed iff every label has a vector; extra classes only warn."""
    have = set(embeddings.class_names)
    missing = [n for n in labels.names if n not in have]
    if missing:
        raise ValidationError(f"embedding file is missing classes: {missing}")
    extra = sorted(have - set(labels.names))
    if extra:
        log.warning("embedding file has unused extra classes: %s", extra)


def synth_orthogonal_embeddings(
    labels: LabelSet, dim: int, seed: int
) -> LabelEmbeddingSet:
    """Deterministic orthonormal test vectors, one per class (needs dim >= U)."""
    u = len(labels)
    if dim < u:
        raise ConfigError(f"need dim >= number of classes, got dim={dim} < U={u}")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, u)))
    entries = {}
    for i, name in enumerate(labels.names):
        vec = q[:, i]
        k = int(np.argmax(np.abs(vec)))
        if vec[k] < 0:
            vec = -vec
        entries[name] = vec
    return LabelEmbeddingSet(
        dim=dim, entries=entries, source_tag=f"synthetic-orthogonal seed={seed}"
    )
