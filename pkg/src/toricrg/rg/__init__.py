"""Renormalization-group block decoding with belief propagation."""

from .block import block_kernel
from .decoder import (
    CORRELATED,
    INDEPENDENT,
    BlockBelief,
    LevelState,
    RgConfig,
    RgResult,
    block_likelihoods,
    bp_pass,
    coarse_frame,
    coarse_priors,
    coarse_syndrome,
    initial_belief,
    make_level,
    rg_class_log_weights,
    rg_decode,
    rg_decode_batch,
)
from .geometry import TWO_BY_ONE, TWO_BY_TWO, BlockGeometry, build_geometry, level_factors
