from __future__ import annotations

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, conint, field_validator


class RawRow(BaseModel):
    """
    One LibSVM line: "+1 3:0.5 10:1".
    """
    model_config = ConfigDict(frozen=True)

    label: float
    features: List[Tuple[conint(ge=1), float]] = []

    @field_validator('features')
    @classmethod
    def _increasing(cls, v: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
        indices = [i for i, _ in v]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError('feature indices must be strictly increasing')
        return v


class RawDataset(BaseModel):
    rows: List[RawRow]
    max_index: conint(ge=0)

    @field_validator('rows')
    @classmethod
    def _signed(cls, v: List[RawRow]) -> List[RawRow]:
        if any(row.label not in (-1.0, 1.0) for row in v):
            raise ValueError('labels must be mapped to -1 or +1')
        return v


class DatasetInfo(BaseModel):
    """
    Catalogue entry for a LibSVM binary dataset.
    """
    model_config = ConfigDict(frozen=True)

    name: str
    filename: str
    workers: conint(ge=1)
    points: conint(ge=1)
    dim: conint(ge=1)
    rank: Optional[conint(ge=1)] = None
