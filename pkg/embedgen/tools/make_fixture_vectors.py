#!/usr/bin/env python3
"""Regenerate the bundled word-vector fixture from the description corpus.

Each vocabulary word gets a deterministic unit-norm vector seeded by the
SHA-256 of the word, so the file is reproducible from the corpus alone.
Run from the embedgen/ directory:

    python3 tools/make_fixture_vectors.py
"""

import hashlib
import re
import sys
from pathlib import Path

import numpy as np

DIM = 50
WORD_RE = re.compile(r"[a-z0-9']+")


def word_vector(word: str, dim: int = DIM) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(word.encode()).digest()[:8], "big")
    vec = np.random.default_rng(seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)


def main() -> int:
    root = Path(__file__).resolve().parents[1] / "fixtures"
    vocab = set()
    for path in sorted((root / "descriptions").glob("*.txt")):
        vocab.update(WORD_RE.findall(path.read_text(encoding="utf-8").lower()))
    # class names used by the synthetic pipeline tokenize to these as well
    vocab.update({"heartwood", "sapwood", "class", "00", "01"})
    words = sorted(vocab)
    out = root / "vectors" / f"wordvecs_{DIM}d.txt"
    lines = [f"{len(words)} {DIM}"]
    for word in words:
        values = " ".join(repr(v) for v in word_vector(word).tolist())
        lines.append(f"{word} {values}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(words)} x {DIM} vectors to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
