"""Target-sequence constructors for weakly aligned training.

Starting from a strongly aligned piano roll (one label frame per input
frame) or a non-aligned score-like roll, these build the label variants
used in the experiments: duration-collapsed rolls, rolls stretched back to
the input length by frame repetition, and real-valued targets obtained by
expanding each active pitch with a harmonic overtone model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import PITCH_COUNT, FeatureSequence, PianoRoll


class MissingStrongError(ValueError):
    """Raised when a variant needs a strongly aligned roll that was not given."""


class MissingScoreError(ValueError):
    """Raised when a variant needs a score roll that was not given."""


class ShrinkNotSupportedError(ValueError):
    """Raised when a stretch target length is shorter than the input roll."""


class LabelVariant(Enum):
    """How the training target is derived from the available annotations.

    The wire values double as CLI identifiers. All variants yield a
    PianoRoll except OVERTONE, which yields a real-valued FeatureSequence.
    """

    STRONG = "strong"  # strongly aligned roll, unchanged
    COLLAPSE = "w1"  # note durations removed (adjacent duplicates merged)
    COLLAPSE_STRETCH = "w2"  # collapsed, then stretched to the input length
    SCORE = "w3"  # score-derived roll with durations, not aligned
    SCORE_STRETCH = "w4"  # score roll stretched to the input length
    OVERTONE = "overtone"  # strongly aligned roll expanded to real overtone energy


@dataclass(frozen=True)
class OvertoneModel:
    """Harmonic expansion of active pitches into real-valued energy.

    Overtone n (n = 1..overtone_count) of a pitch lands
    round(12 * log2(n + 1)) semitone bins above the fundamental with
    amplitude decay_base**n; the fundamental itself has amplitude 1.
    Contributions from different pitches add and each bin saturates at
    `saturation`. Bins above the 72-bin range are discarded.
    """

    overtone_count: int = 10
    decay_base: float = 1.0 / 3.0
    saturation: float = 1.0

    def __post_init__(self) -> None:
        if self.overtone_count < 0:
            raise ValueError("overtone_count must be >= 0")
        if not 0.0 < self.decay_base < 1.0:
            raise ValueError("decay_base must lie strictly between 0 and 1")


def collapse_durations(roll: PianoRoll) -> PianoRoll:
    """Merge runs of consecutive identical frames into single frames."""
    frames = roll.frames
    keep = np.ones(len(frames), dtype=bool)
    keep[1:] = np.any(frames[1:] != frames[:-1], axis=1)
    return PianoRoll(frames[keep])


def stretch_to_length(roll: PianoRoll, target_len: int) -> PianoRoll:
    """Stretch a roll to target_len frames by repeating frames in place.

    Output frame k (1-based) is input frame ceil(k * M / target_len); no
    interpolation, so binary frames stay binary and the order of distinct
    runs is preserved.
    """
    m = len(roll)
    if target_len < m:
        raise ShrinkNotSupportedError(f"cannot stretch length {m} down to {target_len}")
    # ceil(k * m / L) - 1 for k = 1..L, in exact integer arithmetic
    k = np.arange(1, target_len + 1, dtype=np.int64)
    idx = (k * m + target_len - 1) // target_len - 1
    return PianoRoll(roll.frames[idx])


def apply_overtones(roll: PianoRoll, model: OvertoneModel = OvertoneModel()) -> FeatureSequence:
    """Expand a binary roll into real-valued per-frame overtone energy."""
    kernel = np.zeros((PITCH_COUNT, PITCH_COUNT))
    offsets = [0] + [round(12.0 * math.log2(n + 1)) for n in range(1, model.overtone_count + 1)]
    amplitudes = [1.0] + [model.decay_base**n for n in range(1, model.overtone_count + 1)]
    for pitch in range(PITCH_COUNT):
        for off, amp in zip(offsets, amplitudes):
            if pitch + off < PITCH_COUNT:
                kernel[pitch, pitch + off] += amp
    energy = np.minimum(roll.frames @ kernel, model.saturation)
    return FeatureSequence(energy)


def make_variant(
    variant: LabelVariant,
    strong_roll: PianoRoll | None = None,
    score_roll: PianoRoll | None = None,
    input_len: int | None = None,
    overtones: OvertoneModel | None = None,
) -> PianoRoll | FeatureSequence:
    """Build the training target for one excerpt under the given variant."""
    if variant in (LabelVariant.STRONG, LabelVariant.COLLAPSE, LabelVariant.COLLAPSE_STRETCH, LabelVariant.OVERTONE):
        if strong_roll is None:
            raise MissingStrongError(f"variant {variant.value} needs a strongly aligned roll")
    if variant in (LabelVariant.SCORE, LabelVariant.SCORE_STRETCH):
        if score_roll is None:
            raise MissingScoreError(f"variant {variant.value} needs a score roll")
    if variant in (LabelVariant.COLLAPSE_STRETCH, LabelVariant.SCORE_STRETCH) and input_len is None:
        raise ValueError(f"variant {variant.value} needs the input length to stretch to")

    if variant is LabelVariant.STRONG:
        return strong_roll
    if variant is LabelVariant.COLLAPSE:
        return collapse_durations(strong_roll)
    if variant is LabelVariant.COLLAPSE_STRETCH:
        return stretch_to_length(collapse_durations(strong_roll), input_len)
    if variant is LabelVariant.SCORE:
        return score_roll
    if variant is LabelVariant.SCORE_STRETCH:
        return stretch_to_length(score_roll, input_len)
    if variant is LabelVariant.OVERTONE:
        return apply_overtones(strong_roll, overtones if overtones is not None else OvertoneModel())
    raise ValueError(f"unknown variant {variant!r}")
