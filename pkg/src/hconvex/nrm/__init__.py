from .model import (
    AIRCARGO,
    DUAL_APPROX,
    EXACT_DIFF,
    PASSENGER,
    GammaResult,
    NrmInstance,
    NrmOuter,
    ScenarioSet,
    ServiceScenario,
    ShowUpModel,
    booking_objective_mc,
    booking_problem,
    dlp_booking_limits,
    evaluate_policy,
    expected_unit_revenue,
    gamma_aircargo,
    gamma_passenger,
    nrm_outer_gradient,
    policy_revenues,
    recourse_penalty,
    sample_show_ups,
)
from .instances import (
    CargoClass,
    aircargo_instance,
    cargo_route_options,
    hub_spoke_passenger,
    load_cargo_classes,
)

__all__ = [name for name in dir() if not name.startswith("_")]
