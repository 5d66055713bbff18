"""Prompt assembly: interleave the observation, text tokens and image blocks."""

from __future__ import annotations

import hashlib
from typing import Callable, Sequence

from .types import (
    ImageRef,
    ImgBlock,
    Instruction,
    LangBlock,
    ObsBlock,
    SegmentSequence,
    TextSpan,
)

# 384x384 input, 14px patches -> floor(384/14)^2 = 27^2 = 729 patches per image
DEFAULT_PATCH_COUNT = 729

STUB_VOCAB = 32000


def hash_tokenizer(text: str) -> list[int]:
    """Deterministic stand-in text tokenizer.

    Splits on whitespace and hashes each word into [0, STUB_VOCAB).  Not a
    real tokenizer; it only has to provide stable token counts and ids.
    """
    tokens = []
    for word in text.split():
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        tokens.append(int.from_bytes(digest[:4], "big") % STUB_VOCAB)
    return tokens


def assemble_prompt(
    instruction: Instruction,
    tokenizer: Callable[[str], Sequence[int]] = hash_tokenizer,
    patch_count: int = DEFAULT_PATCH_COUNT,
) -> SegmentSequence:
    """Build the full prompt block sequence for one sample.

    The observation block always comes first, followed by the instruction's
    segments in order.  Every image contributes `patch_count` positions; text
    spans contribute their token ids.  Text spans that tokenize to nothing
    (e.g. pure whitespace) are dropped rather than emitting an empty block.
    """
    if patch_count <= 0:
        raise ValueError(f"patch_count must be positive, got {patch_count}")
    blocks = [ObsBlock(count=patch_count)]
    for seg in instruction.segments:
        if isinstance(seg, TextSpan):
            ids = tuple(tokenizer(seg.text))
            if ids:
                blocks.append(LangBlock(token_ids=ids))
        elif isinstance(seg, ImageRef):
            blocks.append(ImgBlock(image_id=seg.image_id, count=patch_count))
    return SegmentSequence(blocks=tuple(blocks))
