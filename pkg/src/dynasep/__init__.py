"""Dynamic ASEP, its duality with standard ASEP, and exact checks of the resulting moment formulas."""
from .duality import (
    DualityObservable,
    check_duality_identity,
    duality_Z,
    half_closed_form,
    step_closed_form,
    sweep_duality,
    verify_cluster_telescoping,
)
from .initdata import (
    sample_half_stationary,
    sample_stationary,
    stationary_measure,
    step_heights,
)
from .lattice import HeightWindow, ParticleConfig
from .moments import ContourSpec, McReport, contour_E_half, contour_E_step, mc_duality_estimate
from .process import simulate_asep, simulate_dynamic_asep
from .qspecial import ModelParams, SeriesControl, q_pochhammer

__version__ = "0.1.0"

__all__ = [
    "ContourSpec",
    "DualityObservable",
    "HeightWindow",
    "McReport",
    "ModelParams",
    "ParticleConfig",
    "SeriesControl",
    "check_duality_identity",
    "contour_E_half",
    "contour_E_step",
    "duality_Z",
    "half_closed_form",
    "mc_duality_estimate",
    "q_pochhammer",
    "sample_half_stationary",
    "sample_stationary",
    "simulate_asep",
    "simulate_dynamic_asep",
    "stationary_measure",
    "step_closed_form",
    "step_heights",
    "sweep_duality",
    "verify_cluster_telescoping",
]
