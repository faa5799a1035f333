"""Grid-scan results shared by the determinant and sign-regularity checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import mpmath


def dec(x, digits: int = 30) -> str:
    """Decimal string for an mpf/HPReal/int, never a binary float."""
    v = getattr(x, "value", x)
    if isinstance(v, int):
        return str(v)
    if not isinstance(v, mpmath.mpf):
        # converting at the global (double) precision would truncate
        with mpmath.workdps(digits + 10):
            v = mpmath.mpf(v)
    return mpmath.nstr(v, digits, strip_zeros=False)


@dataclass
class ScanReport:
    name: str
    passed: bool
    params: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    min_value: Any = None
    max_value: Any = None
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    rigorous: bool = False

    def to_dict(self, with_rows: bool = False) -> dict:
        out = {
            "name": self.name,
            "passed": self.passed,
            "params": self.params,
            "witnesses": self.witnesses,
            "min_value": None if self.min_value is None else dec(self.min_value),
            "max_value": None if self.max_value is None else dec(self.max_value),
            "rigorous": self.rigorous,
            "notes": self.notes,
        }
        if with_rows:
            out["rows"] = self.rows
        return out
