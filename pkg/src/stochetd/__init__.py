"""Convenient one-step Stratonovich integrators for SDEs and spectral SPDEs."""

from .errors import (BlowUp, CoefficientMismatch, ConfigError, DegenerateDirection,
                     DimensionMismatch, IndexOutOfRange, InsufficientData, InvalidConfig,
                     InvalidFactor, MissingLinearPart, NonFinite, StochEtdError)
from .sde_core import Increment, SdeProblem, modified_drift, scalar_problem
from .noise import BrownianPaths, coarsen_paths, generate_paths, levy_area, nested_stratonovich_oracle
from .phi_functions import ContourConfig, EtdCoefficientSet, contour_phi_eval, etd_coefficient_set
from .schemes import (ButcherTableau, SchemeId, integrate_path, step_ito, step_setdrk,
                      step_sifrk, step_srk)

__version__ = "0.1.0"
