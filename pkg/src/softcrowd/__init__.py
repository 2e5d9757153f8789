"""Collective learning with soft population feedback.

Simulation of crowd learning dynamics, influence-weight design (worst-case
bounds and Monte Carlo), system identification from trajectories, a panel
case-study pipeline, and a live Fitness Game server.
"""

__version__ = "0.1.0"

from .dynamics import (
    BETA_CAP,
    Constant,
    CrowdConfig,
    CrowdState,
    DistanceProfile,
    ExplicitInit,
    InfluencePolicy,
    MseInit,
    Off,
    Schedule,
    Trajectory,
    make_time_grid,
    open_loop_step,
    population_feedback,
    read_trajectory_csv,
    resample_to_grid,
    simulate,
    simulate_mean_mse,
    soft_feedback_step,
    write_trajectory_csv,
)
from .control import (
    InfluenceDesign,
    RobustProblem,
    contraction_factor,
    delta_mse,
    mse_bound_step,
    optimize_beta_mc,
    optimize_profile_mc,
    optimize_beta_robust,
    phase_diagram,
    robust_cost_bound,
    robust_dynamic_schedule,
)
from .sysid import (
    SysIdResult,
    estimate_beta,
    estimate_beta_profile,
    estimate_open_loop,
    r_squared,
    refine_mc,
)
from .casestudy import (
    CaseStudyReport,
    PanelSeries,
    analyze,
    derive_theta_star,
    load_panel_csv,
)
from .game import BotParams, GameConfig, GameSession, phase_trajectory
