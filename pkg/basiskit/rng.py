from enum import IntEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, conint

SERVER = 0xFFFFFFFF


class Purpose(IntEnum):
    HESSIAN = 0
    MODEL = 1
    XI = 2
    PARTICIPATION = 3
    GRADIENT = 4
    MONTE_CARLO = 5
    DATA = 6


class RngStream(BaseModel):
    """
    Identifies one independent random stream.

    Identical (seed, round, client, purpose) always yields identical draws,
    whichever thread or order the stream is consumed in.
    """
    model_config = ConfigDict(frozen=True)

    seed: conint(ge=0, lt=2 ** 64)
    round: conint(ge=0) = 0
    client: conint(ge=0) = 0
    purpose: Purpose = Purpose.MONTE_CARLO

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(self.round, self.client, int(self.purpose)),
        )
        return np.random.Generator(np.random.PCG64(seq))


def stream(seed: int, round: int = 0, client: int = 0, purpose: Purpose = Purpose.MONTE_CARLO) -> np.random.Generator:
    return RngStream(seed=seed, round=round, client=client, purpose=purpose).generator()
