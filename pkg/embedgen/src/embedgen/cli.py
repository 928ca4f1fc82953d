"""embed-gen: render prompts, collect descriptions, encode, write the file.

Offline example (bundled fixtures):

    embed-gen --labels Heartwood,Sapwood --source fixture \\
        --fixtures fixtures/descriptions \\
        --encoder vectors:fixtures/vectors/wordvecs_50d.txt \\
        --out embeddings.txt

`--labels` also accepts a dataset manifest CSV (header
`cube_path,label,split`); labels are taken in first-appearance order.
Live mode reads OPENAI_API_KEY (and optional OPENAI_BASE_URL) and can
cache transcripts for offline replay via --cache.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .descriptions import (
    DEFAULT_NUM_PARAGRAPHS,
    FixtureStore,
    LiveClient,
    NameSource,
    generate_descriptions,
)
from .encoders import (
    STRATEGIES,
    default_strategy,
    encode_descriptions,
    load_encoder,
)
from .errors import ConfigError, EmbedGenError
from .prompts import render_prompt
from .writer import write_embedding_file

log = logging.getLogger("embedgen")


def parse_labels(raw: str) -> list[str]:
    """A comma-separated list, or a manifest CSV path."""
    path = Path(raw)
    if path.exists() and path.suffix == ".csv":
        lines = [
            ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()
        ]
        if not lines or lines[0].strip() != "cube_path,label,split":
            raise ConfigError(f"{path}: not a dataset manifest")
        labels: list[str] = []
        for line in lines[1:]:
            parts = line.split(",")
            if len(parts) != 3:
                raise ConfigError(f"{path}: malformed manifest row {line!r}")
            if parts[1] not in labels:
                labels.append(parts[1])
        return labels
    labels = [part.strip() for part in raw.split(",") if part.strip()]
    if len(labels) < 2:
        raise ConfigError("need at least two class labels")
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate labels in {labels}")
    return labels


def build_source(args: argparse.Namespace):
    if args.source == "fixture":
        if not args.fixtures:
            raise ConfigError("--source fixture needs --fixtures DIR")
        return FixtureStore(args.fixtures)
    if args.source == "names":
        return NameSource()
    return LiveClient(model=args.model, cache_dir=args.cache)


def run(args: argparse.Namespace) -> int:
    labels = parse_labels(args.labels)
    encoder = load_encoder(args.encoder)
    strategy = args.strategy or default_strategy(encoder)
    source = build_source(args)
    vectors = {}
    provenances = set()
    for target in labels:
        others = [l for l in labels if l != target]
        prompt = render_prompt(target, others)
        ds = generate_descriptions(target, prompt, source, n=args.num_paragraphs)
        provenances.add(ds.provenance.split(":")[0])
        vectors[target] = encode_descriptions(ds, encoder, strategy)
        log.info("encoded %r from %s", target, ds.provenance)
    tag = (
        f"encoder={encoder.name} strategy={strategy} "
        f"source={'+'.join(sorted(provenances))} paragraphs={args.num_paragraphs}"
    )
    write_embedding_file(vectors, tag, args.out)
    log.info("wrote %d class vectors (dim %d) to %s", len(vectors), encoder.dim,
             args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-gen",
        description="Generate semantic label embeddings for the cube classifier",
    )
    parser.add_argument("--labels", required=True,
                        help="comma-separated class names, or a manifest CSV")
    parser.add_argument("--source", required=True,
                        choices=("live", "fixture", "names"))
    parser.add_argument("--fixtures", help="fixture directory (fixture mode)")
    parser.add_argument("--model", default="gpt-4", help="live-mode model id")
    parser.add_argument("--cache", help="cache live transcripts here as fixtures")
    parser.add_argument("--encoder", required=True,
                        help="'vectors:<word2vec txt>' or 'hf:<model id>'")
    parser.add_argument("--strategy", choices=STRATEGIES,
                        help="default: label_token (contextual), "
                        "word_average (static)")
    parser.add_argument("--num-paragraphs", dest="num_paragraphs", type=int,
                        default=DEFAULT_NUM_PARAGRAPHS)
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except EmbedGenError as exc:
        log.error("%s", exc)
        return 2 if isinstance(exc, ConfigError) else 3


if __name__ == "__main__":
    sys.exit(main())
