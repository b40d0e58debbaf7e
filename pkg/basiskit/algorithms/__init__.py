from typing import Any, Callable, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from basiskit.algorithms.base import MethodContext
from basiskit.algorithms.bl1 import bl1_init, bl1_step
from basiskit.algorithms.bl2 import bl2_init, bl2_step
from basiskit.algorithms.bl3 import bl3_init, bl3_step
from basiskit.algorithms.fednl import fednl_adapter
from basiskit.algorithms.first_order import diana_init, diana_step, gd_init, gd_step
from basiskit.algorithms.newton import newton_init, newton_step
from basiskit.exceptions import ConfigError
from basiskit.models.config import Algorithm
from basiskit.models.records import RoundCost


class Method(BaseModel):
    """
    init(ctx, x0) -> state, step(state, ctx) -> (state, RoundCost).
    symmetric_grids wraps matrix compressors so coefficient grids stay symmetric.
    """
    model_config = ConfigDict(frozen=True)

    name: str
    init: Callable[[MethodContext, np.ndarray], Any]
    step: Callable[[Any, MethodContext], Tuple[Any, RoundCost]]
    symmetric_grids: bool = False


METHODS: Dict[Algorithm, Method] = {
    Algorithm.BL1: Method(name='bl1', init=bl1_init, step=bl1_step),
    Algorithm.BL2: Method(name='bl2', init=bl2_init, step=bl2_step),
    Algorithm.BL3: Method(name='bl3', init=bl3_init, step=bl3_step, symmetric_grids=True),
    Algorithm.NEWTON: Method(name='newton', init=newton_init, step=newton_step),
    Algorithm.GD: Method(name='gd', init=gd_init, step=gd_step),
    Algorithm.DIANA: Method(name='diana', init=diana_init, step=diana_step),
}


def get_method(algorithm: Algorithm) -> Method:
    try:
        return METHODS[algorithm]
    except KeyError:
        raise ConfigError(f'{algorithm.value} must be lowered with fednl_adapter first')


__all__ = ['METHODS', 'Method', 'MethodContext', 'fednl_adapter', 'get_method']
