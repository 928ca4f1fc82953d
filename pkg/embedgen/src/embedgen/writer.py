"""Emit the portable embedding-file format the classifier pipeline consumes.

Format (UTF-8, LF): line 1 `s3fn-embeddings v1`, line 2 `dim=<d>`, line 3
`source=<tag>`, then one `<class name>\\t<comma-separated decimals>` row
per class. Values are written with full float64 round-trip precision.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError

EMBEDDINGS_MAGIC = "s3fn-embeddings v1"


def write_embedding_file(
    vectors: dict[str, np.ndarray], source_tag: str, path: str | Path
) -> None:
    if not vectors:
        raise DataError("no class vectors to write")
    dims = {np.asarray(v).shape for v in vectors.values()}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise DataError(f"class vectors disagree in dimension: {sorted(dims)}")
    dim = next(iter(dims))[0]
    lines = [EMBEDDINGS_MAGIC, f"dim={dim}", f"source={source_tag}"]
    for name, vec in vectors.items():
        values = np.asarray(vec, dtype=np.float64)
        if not np.isfinite(values).all():
            raise DataError(f"class {name!r} vector has non-finite values")
        lines.append(name + "\t" + ",".join(map(repr, values.tolist())))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embedding_file(path: str | Path) -> tuple[dict[str, np.ndarray], str]:
    """Minimal reader for round-trip tests (the classifier has the real one)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 4 or lines[0] != EMBEDDINGS_MAGIC:
        raise DataError(f"{path}: not an embedding file")
    dim = int(lines[1][len("dim=") :])
    source = lines[2][len("source=") :]
    out: dict[str, np.ndarray] = {}
    for row in lines[3:]:
        if not row.strip():
            continue
        name, payload = row.split("\t", 1)
        vec = np.array([float(v) for v in payload.split(",")], dtype=np.float64)
        if vec.shape[0] != dim:
            raise DataError(f"{path}: row for {name!r} has the wrong width")
        out[name] = vec
    return out, source
