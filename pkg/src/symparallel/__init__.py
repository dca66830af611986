"""Relaxed-spin V2 networks and rotation-symmetry parallel readout."""
from .circuits import (BranchEncoding, GateSpec, and_or_gate, condition_weights, decode_outputs,
                       encode_branches, enumerate_branches, full_adder, ripple_carry_adder)
from .dynamics import (CIRCUMFERENCE, IntegratorConfig, InvalidInputError, NumericError,
                       PhasePoint, SpinNetwork, TerminalState, discrete_cut, evolve,
                       evolve_batch, ising_energy, rate, relaxed_cut, step)
from .experiments import (ExperimentConfig, SuccessReport, __version__, group_analysis,
                          run_concurrent, run_sequential)
from .oracle import (CapacityError, FlipChain, drift_sign_profile, enumerate_nontrivial_chains,
                     isotone_check, restricted_ground_state, truth)
from .symmetry import ChainReadout, chain_readout, critical_rotations, rotate, verify_cut_invariance

__all__ = [
    "BranchEncoding", "GateSpec", "and_or_gate", "condition_weights", "decode_outputs",
    "encode_branches", "enumerate_branches", "full_adder", "ripple_carry_adder",
    "CIRCUMFERENCE", "IntegratorConfig", "InvalidInputError", "NumericError", "PhasePoint",
    "SpinNetwork", "TerminalState", "discrete_cut", "evolve", "evolve_batch", "ising_energy",
    "rate", "relaxed_cut", "step",
    "ExperimentConfig", "SuccessReport", "__version__", "group_analysis", "run_concurrent",
    "run_sequential",
    "CapacityError", "FlipChain", "drift_sign_profile", "enumerate_nontrivial_chains",
    "isotone_check", "restricted_ground_state", "truth",
    "ChainReadout", "chain_readout", "critical_rotations", "rotate", "verify_cut_invariance",
]
