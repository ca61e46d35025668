"""Datasets, checkpoints, sweeps and the command line."""

from .checkpoint import (CheckpointError, CorruptHeaderError, TruncatedPayloadError, UnsupportedVersionError,
                         load_checkpoint, load_model, save_checkpoint)
from .data import TrainCrops, ingest_dataset, load_images
from .experiments import (ExperimentSpec, RDSurface, erf_map, erf_target, latency_bench, monotonicity_flags, rd_sweep,
                          width_sweep)

__all__ = [
    "CheckpointError", "CorruptHeaderError", "TruncatedPayloadError", "UnsupportedVersionError",
    "load_checkpoint", "load_model", "save_checkpoint",
    "TrainCrops", "ingest_dataset", "load_images",
    "ExperimentSpec", "RDSurface", "erf_map", "erf_target", "latency_bench", "monotonicity_flags", "rd_sweep",
    "width_sweep",
]
