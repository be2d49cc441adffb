"""Small shared helpers."""

import math


def round_half_up(x: float) -> int:
    """Round to nearest integer with ties going up (not banker's rounding).

    Used everywhere a fractional count is turned into a whole count
    (shared-feature counts, split sizes, sample sizes) so results do not
    flip parity depending on float representation.
    """
    return int(math.floor(x + 0.5))
