from __future__ import annotations

import logging

from basiskit.models.config import Algorithm, BasisTag, CompressorKind, CompressorSpec, RunConfig

logger = logging.getLogger(__name__)


def _symmetrized(spec: CompressorSpec) -> CompressorSpec:
    if spec.symmetrize or spec.kind in (CompressorKind.IDENTITY, CompressorKind.TOP_K_SYM):
        return spec
    return spec.model_copy(update={'symmetrize': True})


def fednl_adapter(config: RunConfig) -> RunConfig:
    """
    Lowers a FedNL request onto the basis methods with the standard basis:

    fednl     -> bl1, p = 1, no model compression, η = 1
    fednl_bc  -> bl1 (bidirectional compression kept)
    fednl_pp  -> bl2 (partial participation)

    Matrix compressors are symmetrized. Other algorithms pass through.
    """
    if config.algorithm == Algorithm.FEDNL:
        update = {
            'algorithm': Algorithm.BL1,
            'p': 1.0,
            'model_compressor': CompressorSpec(),
            'eta': 1.0,
        }
    elif config.algorithm == Algorithm.FEDNL_BC:
        update = {'algorithm': Algorithm.BL1}
    elif config.algorithm == Algorithm.FEDNL_PP:
        update = {'algorithm': Algorithm.BL2}
    else:
        return config
    update['basis'] = BasisTag.STANDARD
    update['matrix_compressor'] = _symmetrized(config.matrix_compressor)
    lowered = config.model_copy(update=update)
    logger.debug(f'lowered {config.algorithm.value} to {lowered.algorithm.value}')
    return lowered
