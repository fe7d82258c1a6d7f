"""Belief propagation decoders with ordered Tanner forest post-processing."""

from .bp import BpConfig, DecodeResult, bp_decode, bp_decode_matrix, llr_to_probs, posteriors_to_order, probs_to_llr
from .codes import build_repetition_code, build_rotated_surface_code, css_orthogonal
from .dem import (
    CLIP_HIGH,
    CLIP_LOW,
    DemParseError,
    DetectorModel,
    build_code_capacity_model,
    build_phenomenological_model,
    load_model,
    model_from_columns,
    parse_dem_text,
    save_model,
    to_dem_text,
)
from .gf2 import DimensionError, SparseBinaryMatrix, in_image, matmul_mod2, matvec_mod2, rank, read_alist, row_reduce, write_alist
from .otf import OtfSelection, UnionFindForest, augment_with_virtual_checks, build_otf, is_forest, otf_decode
from .pipelines import (
    PipelineConfig,
    bivariate_bicycle_ensemble_config,
    bivariate_bicycle_single_config,
    bp_bp_osd0_config,
    bp_osd0_config,
    ensemble_decode,
    osd0_decode,
    run_pipeline,
    surface_code_config,
)
from .sim import MonteCarloConfig, MonteCarloStats, bench_decoders, run_montecarlo, sample_error
from .sparsify import DecompositionError, SparsifyConfig, TransferMatrix, build_transfer_matrix, decompose_column, map_soft_info

__version__ = "0.1.0"
