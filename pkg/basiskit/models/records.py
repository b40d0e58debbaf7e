from __future__ import annotations

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, computed_field, conint, field_validator

from basiskit.models.config import RunConfig
from basiskit.models.problem import Reference


class BitCost(BaseModel):
    """
    Bits of one message, split by what they encode.
    """
    model_config = ConfigDict(frozen=True)

    payload: conint(ge=0) = 0
    index: conint(ge=0) = 0
    scalar: conint(ge=0) = 0

    @property
    def total(self) -> int:
        return self.payload + self.index + self.scalar

    def __add__(self, other: 'BitCost') -> 'BitCost':
        return BitCost(
            payload=self.payload + other.payload,
            index=self.index + other.index,
            scalar=self.scalar + other.scalar,
        )


class RoundCost(BaseModel):
    """
    Bits moved in one round, per client and per message type.

    breakdown keys are "up:<message>" / "down:<message>", summed over clients.
    """
    up: List[int]
    down: List[int]
    breakdown: Dict[str, int] = {}

    @property
    def n(self) -> int:
        return len(self.up)

    @property
    def up_per_node(self) -> float:
        return sum(self.up) / self.n

    @property
    def down_per_node(self) -> float:
        return sum(self.down) / self.n


class CostLedger:
    """
    Accumulates the messages of one round.
    """

    def __init__(self, n: int):
        self.up = [0] * n
        self.down = [0] * n
        self.breakdown: Dict[str, int] = {}

    def send_up(self, client: int, message: str, bits: int):
        self.up[client] += int(bits)
        key = f'up:{message}'
        self.breakdown[key] = self.breakdown.get(key, 0) + int(bits)

    def send_down(self, client: int, message: str, bits: int):
        self.down[client] += int(bits)
        key = f'down:{message}'
        self.breakdown[key] = self.breakdown.get(key, 0) + int(bits)

    def close(self) -> RoundCost:
        return RoundCost(up=self.up, down=self.down, breakdown=dict(sorted(self.breakdown.items())))


class RunRecord(BaseModel):
    round: conint(ge=0)
    fgap: float
    dist: float
    up_bits: float
    down_bits: float
    wall_ms: float


class ExperimentStatus(str, Enum):
    RUNNING = 'running'
    CONVERGED = 'converged'
    DIVERGED = 'diverged'
    BUDGET = 'budget'


class Experiment(BaseModel):
    config: RunConfig
    reference: Reference
    records: List[RunRecord] = []
    status: ExperimentStatus = ExperimentStatus.RUNNING
    setup_bits: float = 0.0
    message: Optional[str] = None

    @field_validator('records')
    @classmethod
    def _ordered(cls, v: List[RunRecord]) -> List[RunRecord]:
        rounds = [r.round for r in v]
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise ValueError('records must be strictly ordered by round')
        return v


class CheckResult(BaseModel):
    name: str
    passed: bool
    measured: float
    bound: float


class VerifyReport(BaseModel):
    suite: str
    checks: List[CheckResult] = []

    @computed_field
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: 'VerifyReport') -> 'VerifyReport':
        return VerifyReport(suite=self.suite, checks=self.checks + other.checks)
