from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, conint, field_validator, model_validator


class ClientShard(BaseModel):
    """
    Data held by one client: m rows a_ij and labels b_ij ∈ {-1, +1}.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    client_id: conint(ge=0)
    features: np.ndarray
    labels: np.ndarray

    @field_validator('features')
    @classmethod
    def _features(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f'features must be a non-empty m x d matrix, got {v.shape}')
        if not np.all(np.isfinite(v)):
            raise ValueError('features must be finite')
        return v

    @field_validator('labels')
    @classmethod
    def _labels(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        if not np.all((v == 1.0) | (v == -1.0)):
            raise ValueError('labels must be -1 or +1')
        return v

    @model_validator(mode='after')
    def _rows_match(self) -> 'ClientShard':
        if self.features.shape[0] != self.labels.size:
            raise ValueError(f'{self.features.shape[0]} rows but {self.labels.size} labels')
        return self

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


class Reference(BaseModel):
    """
    Reference solution from full Newton steps.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x_star: np.ndarray
    f_star: float
    grad_norm: float
    newton_iters: conint(ge=0)
