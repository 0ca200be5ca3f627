"""Cross-modal lexical similarity and the 14-dimensional feature vector.

The similarity score measures how much of the spoken-word token set shows
up in the frame-text token set; it is deliberately asymmetric (normalized
by the spoken set's size only). The feature vector is the 13 audio
coefficients followed by that score, with zero fills for absent modalities.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from deepagent.audio import AudioEmbedding, N_COEFFS

FEATURE_DIM = N_COEFFS + 1

_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


@dataclass
class TokenSet:
    tokens: set[str]
    source: str = "asr"  # "asr" or "ocr"


@dataclass
class MultimodalFeature:
    x: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    audio_present: bool = False
    text_present: bool = False


def tokenize(text: str, source: str = "asr") -> TokenSet:
    """Lowercase and split on every non-alphanumeric codepoint."""
    parts = _SPLIT.split(text.lower())
    return TokenSet({p for p in parts if p}, source)


def lexical_similarity(audio_tokens: TokenSet, visual_tokens: TokenSet) -> float:
    """|intersection| / max(|audio tokens|, 1); always in [0, 1]."""
    overlap = len(audio_tokens.tokens & visual_tokens.tokens)
    return overlap / max(len(audio_tokens.tokens), 1)


def build_feature(audio: AudioEmbedding, audio_tokens: TokenSet | None,
                  visual_tokens: TokenSet | None) -> MultimodalFeature:
    """Assemble [audio coeffs, similarity]; absent modalities contribute zeros."""
    x = np.zeros(FEATURE_DIM)
    if audio.present:
        x[:N_COEFFS] = audio.coeffs
    text_present = audio_tokens is not None and visual_tokens is not None
    if text_present:
        x[N_COEFFS] = lexical_similarity(audio_tokens, visual_tokens)
    return MultimodalFeature(x, audio.present, text_present)
