"""The symmetric local influence sequence a_0 = 0 <= a_1 <= ... <= 1."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ASequence:
    """Finite prefix of the sequence; every index past the end reads the last value."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(x) for x in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ValidationError("an influence sequence needs at least a_0 and a_1")
        if vals[0] != 0.0:
            raise ValidationError("a_0 must be 0")
        if any(not 0.0 <= x <= 1.0 for x in vals):
            raise ValidationError("sequence values must lie in [0, 1]")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValidationError("sequence must be non-decreasing")

    def __getitem__(self, i: int) -> float:
        if i < 0:
            raise IndexError(i)
        return self.values[min(i, len(self.values) - 1)]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def last_index(self) -> int:
        return len(self.values) - 1

    @property
    def p_star(self) -> float:
        return self.values[-1]

    @property
    def a1(self) -> float:
        return self[1]

    @property
    def a2(self) -> float:
        return self[2]

    def table(self, upto: int | None = None) -> np.ndarray:
        """a_0..a_upto as an array (default: the stored prefix)."""
        upto = self.last_index if upto is None else upto
        return np.array([self[i] for i in range(upto + 1)], dtype=float)

    def to_json(self) -> str:
        return json.dumps(list(self.values))

    @classmethod
    def from_json(cls, text: str) -> "ASequence":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"sequence file is not JSON: {exc}") from exc
        if not isinstance(data, list):
            raise ValidationError("sequence file must hold a JSON array")
        return cls(tuple(data))
