"""Maglev vibration isolation platform toolkit.

Simulation of the 6-DoF levitated platform with redundant nonlinear
actuators, optimal wrench allocation, analytic and learned system
inversion for payload-agnostic decoupling, and the hybrid adaptive
feedforward / internal-model isolation controller, with a CLI that runs
the standard experiments end to end.
"""

__version__ = "0.1.0"

from .allocation import AllocationProblem, allocate, forces_to_currents
from .control import (FxLmsChannel, HafimcController, ImcChannel,
                      design_imc, fxlms_step, hafimc_step, imc_step,
                      margin_at, stability_margin)
from .dataset import (CollectionConfig, ExcitationConfig, TrainingDataset,
                      collect_dataset, generate_excitation, load_dataset,
                      normalize_dataset, save_dataset, split_dataset)
from .harness import (DisturbanceSpec, ScenarioConfig, ScenarioResult,
                      StepCommand, TransmissionPath, attenuation_db,
                      generate_disturbance, run_scenario, run_sweep,
                      scenario_hash, step_response_check,
                      transmissibility_spectrum)
from .inversion import (InversionReport, acceleration_jacobian,
                        analytic_inverse, jacobian, output_accelerations)
from .plant import (CoilPosition, PlatformParams, ResidualModel,
                    actuation_map, actuator_force, coil_positions,
                    coupling_acceleration_x, default_params, load_platform,
                    save_platform, step_dynamics, with_payload)
from .rbf import (Normalization, RbfNetwork, load_network, network_rmse,
                  rbf_forward, rmse, save_network)
from .training import TrainingConfig, TrainingReport, errcor_fit, train_network
