"""driftlens: global vs local-neighborhood measures of semantic change."""

from .alignment import AlignedSeries, align_series, procrustes
from .embedding_store import (PosLexicon, Snapshot, common_vocab, load_snapshot, normalize_rows,
                              save_snapshot)
from .errors import (AbsentWordError, AlignmentError, ConfigError, ConvergenceError,
                     DegenerateMeasureError, DriftlensError, EmptyOverlapError, ParseError,
                     SingularDesignError)
from .kernels import BACKEND as KERNEL_BACKEND
from .measures import (ChangeTable, SecondOrderVector, case_study, global_change, local_change,
                       score_all, second_order_vector, standardize)
from .neighbors import NeighborSet, nearest_neighbors, neighbor_union
from .regression import (RegressionDataset, RegressionResult, build_design, fit_mixed, fit_ols,
                         pos_contrast_report)

__version__ = "0.1.0"

__all__ = [
    "AbsentWordError", "AlignedSeries", "AlignmentError", "ChangeTable", "ConfigError",
    "ConvergenceError", "DegenerateMeasureError", "DriftlensError", "EmptyOverlapError",
    "KERNEL_BACKEND", "NeighborSet", "ParseError", "PosLexicon", "RegressionDataset",
    "RegressionResult", "SecondOrderVector", "SingularDesignError", "Snapshot", "align_series",
    "build_design", "case_study", "common_vocab", "fit_mixed", "fit_ols", "global_change",
    "load_snapshot", "local_change", "nearest_neighbors", "neighbor_union", "normalize_rows",
    "pos_contrast_report", "procrustes", "save_snapshot", "score_all", "second_order_vector",
    "standardize",
]
