"""Crammed policy learning and evaluation.

Thin wrapper over the C++ core. Every function here is implemented in
``cramkit._core``.
"""

from ._core import (
    DGP,
    CramkitError,
    CramResult,
    Dataset,
    Learner,
    Policy,
    SplitResult,
    StabilityDiagnostics,
    acceptance_prob,
    confidence_interval,
    constant_learner,
    cram_run,
    diagnose_stability,
    generate_dataset,
    ipw_kernel,
    l1_policy_distance,
    mix_policies,
    mlearner_ridge,
    normal_quantile,
    oracle_delta,
    oracle_value,
    read_csv,
    run_monte_carlo,
    sample_split_run,
    slearner_ridge,
    stable_wrap,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
