"""Per-region rate fields."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping


@dataclass(frozen=True)
class RateField:
    """Log incidence values keyed by region id, for a single code.

    Values must all be finite; regions with no usable value for this code
    are simply absent from the mapping.
    """

    code: str
    values: Mapping[str, float]

    def __post_init__(self):
        bad = [rid for rid, v in self.values.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(
                f"field {self.code!r} has non-finite values for regions {bad[:5]}"
            )

    @property
    def observed_count(self) -> int:
        return len(self.values)

    def shifted(self, offset: float) -> "RateField":
        """Return a copy with `offset` added to every value."""
        return RateField(self.code, {rid: v + offset for rid, v in self.values.items()})
