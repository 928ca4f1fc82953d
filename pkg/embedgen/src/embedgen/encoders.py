"""Text encoders and pooling strategies for class-description embeddings.

Two encoder families are supported. StaticWordVectors reads a word2vec
text file and looks words up in a fixed table; ContextualEncoder wraps a
pretrained bidirectional transformer (via the optional `transformers`
dependency) and exposes last-layer hidden states. The embedding dimension
always comes from the encoder, never from configuration.

Strategies:
  label_token  -- average the vectors of the class name's tokens at their
                  first occurrence inside each paragraph; paragraphs that
                  never mention the class fall back to mean_pool (warned).
  mean_pool    -- average every token vector of the paragraph.
  word_average -- static vectors only: average all in-vocabulary word
                  vectors of the paragraph (for a fixed table this is the
                  same pooling as mean_pool; it exists as the named
                  strategy for static-vector runs).

Per-paragraph vectors are averaged into the final class vector, so the
result is invariant to paragraph order.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np

from .descriptions import DescriptionSet
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

STRATEGIES = ("label_token", "mean_pool", "word_average")

_WORD_RE = re.compile(r"[a-z0-9']+")


def tokenize_words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class StaticWordVectors:
    """Fixed word -> vector table in word2vec text format.

    The file starts with a `<count> <dim>` header line followed by
    `<word> <v1> ... <vdim>` rows.
    """

    kind = "static"

    def __init__(self, path: str | Path):
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise DataError(f"{path}: empty vector file")
        header = lines[0].split()
        if len(header) != 2:
            raise DataError(f"{path}: expected '<count> <dim>' header")
        count, dim = int(header[0]), int(header[1])
        self.dim = dim
        self.table: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(lines[1 : count + 1], start=2):
            parts = line.split()
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{lineno}: row width does not match dim")
            self.table[parts[0]] = np.array(parts[1:], dtype=np.float64)
        self.name = path.name

    def lookup(self, word: str) -> np.ndarray | None:
        return self.table.get(word)

    def paragraph_vectors(self, text: str):
        """(tokens, per-token vector or None for out-of-vocabulary)."""
        tokens = tokenize_words(text)
        return tokens, [self.lookup(t) for t in tokens]


class ContextualEncoder:
    """Pretrained bidirectional transformer; needs locally available weights."""

    kind = "contextual"

    def __init__(self, model_id: str):
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ConfigError(
                f"contextual encoder {model_id!r} needs the transformers extra"
            ) from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:  # weights missing / no hub access
            raise ConfigError(
                f"could not load encoder {model_id!r}: {exc}"
            ) from exc
        self.model.eval()
        self.dim = int(self.model.config.hidden_size)
        self.name = model_id

    def hidden_states(self, text: str):
        """(token ids without specials, hidden states aligned to them)."""
        import torch

        enc = self.tokenizer(
            text, return_tensors="pt", truncation=True, max_length=512
        )
        with torch.no_grad():
            out = self.model(**enc)
        hidden = out.last_hidden_state[0].numpy().astype(np.float64)
        ids = enc["input_ids"][0].tolist()
        special = set(self.tokenizer.all_special_ids)
        keep = [i for i, t in enumerate(ids) if t not in special]
        return [ids[i] for i in keep], hidden[keep]

    def label_ids(self, class_name: str) -> list[int]:
        return self.tokenizer(class_name, add_special_tokens=False)["input_ids"]


def _find_span(haystack: list, needle: list) -> int:
    if not needle:
        return -1
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i : i + len(needle)] == needle:
            return i
    return -1


def _static_paragraph_vector(
    encoder: StaticWordVectors, paragraph: str, class_name: str, strategy: str
):
    tokens, vectors = encoder.paragraph_vectors(paragraph)
    in_vocab = [v for v in vectors if v is not None]
    if strategy == "label_token":
        name_tokens = [t for t in tokenize_words(class_name)]
        span = _find_span(tokens, name_tokens)
        if span >= 0:
            picked = [
                v for v in vectors[span : span + len(name_tokens)] if v is not None
            ]
            if picked:
                return np.mean(picked, axis=0)
        log.warning(
            "class name %r not found in a paragraph; mean-pooling instead",
            class_name,
        )
    if not in_vocab:
        return None
    return np.mean(in_vocab, axis=0)


def _contextual_paragraph_vector(
    encoder: ContextualEncoder, paragraph: str, class_name: str, strategy: str
):
    ids, hidden = encoder.hidden_states(paragraph)
    if hidden.shape[0] == 0:
        return None
    if strategy == "label_token":
        span = _find_span(ids, encoder.label_ids(class_name))
        if span >= 0:
            width = len(encoder.label_ids(class_name))
            return hidden[span : span + width].mean(axis=0)
        log.warning(
            "class name %r not tokenized inside a paragraph; mean-pooling",
            class_name,
        )
    return hidden.mean(axis=0)


def encode_descriptions(
    ds: DescriptionSet,
    encoder,
    strategy: str = "label_token",
) -> np.ndarray:
    """One vector per class: per-paragraph vectors averaged."""
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}, expected {STRATEGIES}")
    if strategy == "word_average" and encoder.kind != "static":
        raise ConfigError("word_average requires a static word-vector encoder")
    if encoder.kind == "static":
        if strategy == "word_average":
            name_in_vocab = any(
                encoder.lookup(t) is not None for t in tokenize_words(ds.class_name)
            )
            if not name_in_vocab:
                log.warning(
                    "class name %r has no in-vocabulary tokens; word_average "
                    "falls back to mean_pool",
                    ds.class_name,
                )
                strategy = "mean_pool"
        per_paragraph = [
            _static_paragraph_vector(encoder, p, ds.class_name, strategy)
            for p in ds.paragraphs
        ]
    else:
        per_paragraph = [
            _contextual_paragraph_vector(encoder, p, ds.class_name, strategy)
            for p in ds.paragraphs
        ]
    kept = [v for v in per_paragraph if v is not None]
    if len(kept) < len(per_paragraph):
        log.warning(
            "%d of %d paragraphs for %r had no usable tokens",
            len(per_paragraph) - len(kept), len(per_paragraph), ds.class_name,
        )
    if not kept:
        raise DataError(
            f"no paragraph of {ds.class_name!r} produced a vector "
            f"(everything out of vocabulary?)"
        )
    return np.mean(kept, axis=0)


def load_encoder(spec: str):
    """Encoder factory: 'vectors:<path>' or 'hf:<model id>' (or a bare path)."""
    if spec.startswith("vectors:"):
        return StaticWordVectors(spec[len("vectors:") :])
    if spec.startswith("hf:"):
        return ContextualEncoder(spec[len("hf:") :])
    if spec.endswith(".txt"):
        return StaticWordVectors(spec)
    raise ConfigError(
        f"unrecognized encoder {spec!r}; use 'vectors:<file>' or 'hf:<model>'"
    )


def default_strategy(encoder) -> str:
    return "word_average" if encoder.kind == "static" else "label_token"
