"""Small shared helpers."""

import math


def round_half_up(x: float) -> int:
    """Round a non-negative duration-in-samples to the nearest integer, halves up.

    Used everywhere seconds are converted to sample or frame counts so
    trimmed datasets are bit-reproducible across platforms.
    """
    return int(math.floor(x + 0.5))
