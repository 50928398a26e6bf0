__version__ = "0.1.0"

from .errors import (
    ConfigError, DegenerateModel, GroupMismatch, HiddenRVError, NegativeDriftViolated, NoRoot,
    NonContracting, NonTransient, NotFound, OpenArc, OutsideDomain, RejectionStall, TraceDiverged, Unsupported,
    )
from .models import ModelSpec, bekk_diag, ccc_garch, constant, custom, log_gaussian, sample_ab, spec_from_config
from .mgf import PhiEvaluator, check_assumptions, grad_phi, phi, psi, solve_alpha, solve_tail_indices
from .levelset import find_xi_star, trace_level_set
from .mc import (
    EsscherTilt, ImportanceEngine, SampleBatch, SimulationConfig,
    joint_exceedance_prob, perpetuity_truncated, simulate_stationary, walk_box_prob,
    )
from .tails import k_invariance_check, joint_tail_scan, marginal_tail_scan, mixed_moment, product_tail_index, spectral_measure
from .renewal import IncrementLaw, Rectangle, carlsson_bound_check, group_renewal_estimate, renewal_measure_estimate
from .hiddenrv import HiddenRVAPI
