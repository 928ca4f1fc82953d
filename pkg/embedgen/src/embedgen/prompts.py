"""Prompt rendering for per-class description generation."""

from __future__ import annotations

from .errors import ConfigError

DEFAULT_TEMPLATE = (
    "Write a detailed factual paragraph about {target_label}, highlighting "
    "its unique characteristics and how it differs from the other labels: "
    "{other_labels}. Focus on how they look different from each other and "
    "how their reflectance varies on the NIR, VNIR and SWIR spectral range. "
    "Also focus on physical features relevant to hyperspectral analysis."
)


def render_prompt(
    target: str, others: list[str], template: str = DEFAULT_TEMPLATE
) -> str:
    """Deterministic substitution; other labels are comma-joined."""
    if not target:
        raise ConfigError("target label is empty")
    if target in others:
        raise ConfigError(f"target label {target!r} also appears in the other labels")
    if not others:
        raise ConfigError("need at least one other label to contrast against")
    return template.format(target_label=target, other_labels=", ".join(others))
