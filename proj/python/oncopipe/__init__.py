"""Python face of the pipeline toolkit's core operations."""

from ._core import (
    adjusted_accuracy,
    count_nouns,
    discrepancy_table,
    normal_interval,
    normalize_text,
    outperform_range,
    segment_sentences,
    shannon_entropy,
    softmax_t,
    wilson_interval,
)

__all__ = [
    "adjusted_accuracy",
    "count_nouns",
    "discrepancy_table",
    "normal_interval",
    "normalize_text",
    "outperform_range",
    "segment_sentences",
    "shannon_entropy",
    "softmax_t",
    "wilson_interval",
]
