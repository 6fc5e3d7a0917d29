"""Geographically weighted gradient boosting with OLS and GWR baselines."""
from .boost import (BoostConfig, BoostTrace, GwrBoostModel, aggregate_coefficients, boosted_hat_matrix,
                    early_stop_check, fit_gwrboost, fit_gwrboost_from_reference, stagewise_hat_matrix)
from .data import Dataset, DatasetSchema, StandardizationRecord, load_csv, write_coefficients, write_diagnostics, zscore
from .errors import (GwrError, InvalidBandwidthError, InvalidConfigError, SearchFailureError, SingularSystemError,
                     UndefinedVarianceError)
from .gwr import GwrModel, fit_gwr, fit_ols, search_bandwidth
from .linalg import global_hat_matrix, wls_solve
from .metrics import Diagnostics, coefficient_rmse, diagnose, morans_i
from .simulation import generate_dataset, run_replications, surface_value
from .weights import SpatialWeightScheme, kernel_weight, pairwise_distance, weight_vector

__version__ = "0.1.0"
