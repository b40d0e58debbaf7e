from __future__ import annotations

from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import (
    AliasChoices,
    BaseModel,
    ConfigDict,
    Field,
    confloat,
    conint,
    model_validator,
)


class CompressorKind(str, Enum):
    IDENTITY = 'identity'
    TOP_K = 'top_k'
    TOP_K_SYM = 'top_k_sym'
    RAND_K = 'rand_k'
    RANK_R = 'rank_r'
    DITHERING = 'dithering'
    NATURAL = 'natural'
    RRANK_R = 'rrank_r'
    NRANK_R = 'nrank_r'
    RTOP_K = 'rtop_k'
    NTOP_K = 'ntop_k'


class CompressorSpec(BaseModel):
    """
    {"kind": "top_k", "k": "r"}
    {"kind": "rrank_r", "rank": 1, "scaling": "sqrt_sigma"}
    {"kind": "dithering", "levels": 4, "norm": "inf"}

    k = "r" resolves to the side of the coefficient block the compressor acts on
    (the intrinsic dimension for subspace bases, d otherwise).
    """
    model_config = ConfigDict(extra='forbid', frozen=True)

    kind: CompressorKind = CompressorKind.IDENTITY
    k: Optional[Union[conint(ge=1), Literal['r']]] = None
    rank: Optional[conint(ge=1)] = None
    levels: Optional[conint(ge=1)] = None
    norm: Literal['2', 'inf'] = '2'
    scaling: Literal['unit', 'sqrt_sigma'] = 'unit'
    symmetrize: bool = False

    @model_validator(mode='after')
    def _check_params(self) -> 'CompressorSpec':
        needs_k = {CompressorKind.TOP_K, CompressorKind.TOP_K_SYM, CompressorKind.RAND_K,
                   CompressorKind.RTOP_K, CompressorKind.NTOP_K}
        needs_rank = {CompressorKind.RANK_R, CompressorKind.RRANK_R, CompressorKind.NRANK_R}
        if self.kind in needs_k and self.k is None:
            raise ValueError(f'{self.kind.value} needs k')
        if self.kind in needs_rank and self.rank is None:
            raise ValueError(f'{self.kind.value} needs rank')
        return self


class Algorithm(str, Enum):
    BL1 = 'bl1'
    BL2 = 'bl2'
    BL3 = 'bl3'
    NEWTON = 'newton'
    GD = 'gd'
    DIANA = 'diana'
    FEDNL = 'fednl'
    FEDNL_BC = 'fednl_bc'
    FEDNL_PP = 'fednl_pp'


class BasisTag(str, Enum):
    STANDARD = 'standard'
    TRIANGULAR = 'triangular'
    PSD = 'psd'
    SUBSPACE = 'subspace'
    PSD_SUBSPACE = 'psd_subspace'


class SynthSpec(BaseModel):
    """
    {"d": 30, "r": 6, "m": 50}
    """
    model_config = ConfigDict(extra='forbid', frozen=True)

    d: conint(ge=1)
    r: conint(ge=1)
    m: conint(ge=1)

    @model_validator(mode='after')
    def _check_rank(self) -> 'SynthSpec':
        if self.r > self.d:
            raise ValueError(f'r={self.r} exceeds d={self.d}')
        return self


class RunConfig(BaseModel):
    """
    {
        "dataset": "data/a1a",
        "rows": 400,
        "n": 4,
        "lambda": 0.001,
        "algorithm": "bl1",
        "basis": "standard",
        "matrix_compressor": {"kind": "top_k", "k": "r"},
        "seed": 0,
        "max_rounds": 40
    }
    """
    model_config = ConfigDict(extra='forbid', frozen=True, populate_by_name=True)

    # problem
    dataset: Optional[str] = None
    dataset_name: Optional[str] = None
    synth: Optional[SynthSpec] = None
    rows: Optional[conint(ge=1)] = None
    d: Optional[conint(ge=1)] = None
    n: conint(ge=1) = 1
    lam: confloat(gt=0) = Field(default=1e-3, validation_alias=AliasChoices('lam', 'lambda'))

    # method
    algorithm: Algorithm = Algorithm.BL1
    alpha: Optional[confloat(gt=0)] = None
    eta: Optional[confloat(gt=0)] = None
    p: confloat(gt=0, le=1) = 1.0
    tau: Optional[conint(ge=1)] = None
    c: confloat(gt=0) = 0.1
    option: Literal[1, 2] = 2
    hessian_order: Literal['fresh', 'lagged'] = 'fresh'
    init: Literal['hessian', 'zero'] = 'hessian'
    gradient_in_basis: bool = False
    stepsize: Optional[confloat(gt=0)] = None
    warm_start: conint(ge=0) = 0
    x0: Optional[List[float]] = None

    # compression
    basis: BasisTag = BasisTag.STANDARD
    matrix_compressor: CompressorSpec = CompressorSpec()
    model_compressor: CompressorSpec = CompressorSpec()
    gradient_compressor: CompressorSpec = CompressorSpec(kind=CompressorKind.DITHERING)
    float_bits: Literal[32, 64] = 64

    # budget and output
    seed: conint(ge=0) = 0
    max_rounds: conint(ge=0) = 200
    max_bits: confloat(gt=0) = 1e9
    target_gap: confloat(ge=0) = 1e-10
    count_download: bool = True
    output_csv: Optional[str] = None
    output_svg: Optional[str] = None
    record_wall_clock: bool = False

    @model_validator(mode='after')
    def _check_ranges(self) -> 'RunConfig':
        from_file = self.dataset is not None or self.dataset_name is not None
        if from_file == (self.synth is not None):
            raise ValueError('either a dataset (path or catalogue name) or synth is required, not both')
        if self.tau is not None and self.tau > self.n:
            raise ValueError(f'tau={self.tau} exceeds n={self.n}')
        return self

    @property
    def participants(self) -> int:
        return self.n if self.tau is None else self.tau
