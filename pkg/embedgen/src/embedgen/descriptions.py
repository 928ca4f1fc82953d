"""Description sources: offline fixture store, bare names, live LLM client.

A fixture file holds one class's paragraphs separated by blank lines. Live
mode talks to an OpenAI-compatible chat endpoint (OPENAI_API_KEY, optional
OPENAI_BASE_URL) and can cache each transcript in fixture format so later
runs replay offline.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import ConfigError, DataError, RetryableError

log = logging.getLogger(__name__)

DEFAULT_NUM_PARAGRAPHS = 10


@dataclass(frozen=True)
class DescriptionSet:
    class_name: str
    paragraphs: tuple[str, ...]
    provenance: str

    def __post_init__(self):
        if not self.paragraphs:
            raise DataError(f"no paragraphs for class {self.class_name!r}")


def class_slug(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name.lower())


def split_paragraphs(text: str) -> list[str]:
    blocks = [b.strip().replace("\n", " ") for b in text.split("\n\n")]
    return [b for b in blocks if b]


def join_paragraphs(paragraphs) -> str:
    return "\n\n".join(paragraphs) + "\n"


class FixtureStore:
    """Directory of <slug>.txt files, one per class."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, class_name: str) -> Path:
        return self.root / f"{class_slug(class_name)}.txt"

    def paragraphs(self, class_name: str, prompt: str, n: int):
        path = self.path_for(class_name)
        if not path.exists():
            raise ConfigError(
                f"no fixture for class {class_name!r}: expected {path}"
            )
        blocks = split_paragraphs(path.read_text(encoding="utf-8"))
        if not blocks:
            raise DataError(f"fixture {path} holds no paragraphs")
        if len(blocks) < n:
            log.info(
                "fixture for %r has %d paragraphs, requested %d; using all",
                class_name, len(blocks), n,
            )
        return blocks[:n], f"fixture:{path.name}"


class NameSource:
    """The bare class name as the only 'description' (label-only mode)."""

    def paragraphs(self, class_name: str, prompt: str, n: int):
        return [class_name], "names"


class LiveClient:
    """OpenAI-compatible chat-completion client with simple retry."""

    def __init__(
        self,
        model: str = "gpt-4",
        cache_dir: str | Path | None = None,
        max_attempts: int = 3,
        timeout: float = 60.0,
    ):
        self.model = model
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_attempts = max_attempts
        self.timeout = timeout

    def _complete(self, prompt: str) -> str:
        key = os.environ.get("OPENAI_API_KEY")
        if not key:
            raise ConfigError("live mode needs OPENAI_API_KEY in the environment")
        base = os.environ.get("OPENAI_BASE_URL", "https://api.openai.com")
        url = f"{base.rstrip('/')}/v1/chat/completions"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        last = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(
                    url,
                    json=payload,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.timeout,
                )
                if resp.status_code == 200:
                    return resp.json()["choices"][0]["message"]["content"]
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
            except requests.RequestException as exc:
                last = str(exc)
            time.sleep(0.5 * (attempt + 1))
        raise RetryableError(f"chat completion failed after retries: {last}")

    def paragraphs(self, class_name: str, prompt: str, n: int):
        blocks = [self._complete(prompt).strip().replace("\n", " ")
                  for _ in range(n)]
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            out = self.cache_dir / f"{class_slug(class_name)}.txt"
            out.write_text(join_paragraphs(blocks), encoding="utf-8")
            log.info("cached live transcript to %s", out)
        return blocks, f"live:{self.model}"


def generate_descriptions(
    class_name: str,
    prompt: str,
    source,
    n: int = DEFAULT_NUM_PARAGRAPHS,
) -> DescriptionSet:
    """Collect paragraphs for one class from the given source."""
    if n < 1:
        raise ConfigError(f"need at least one paragraph, asked for {n}")
    blocks, provenance = source.paragraphs(class_name, prompt, n)
    return DescriptionSet(
        class_name=class_name, paragraphs=tuple(blocks), provenance=provenance
    )
