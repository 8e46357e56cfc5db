"""Chance-constrained open-loop planning for multi-vehicle LTI systems under
multivariate t disturbances."""

from .distributions import BetaPrime, SqrtBetaPrime, StudentT, pairwise_sum_params
from .dynamics import LtiModel, concat, cwh_3d, cwh_planar_attitude
from .quantile import build_pwa, reduce_to_pwa, taylor_march
from .scenario import compile_scenario, load_scenario, parse_scenario, save_scenario
from .solver import SolverConfig, ccp_solve
from .validate import estimate_satisfaction

__version__ = "0.1.0"
