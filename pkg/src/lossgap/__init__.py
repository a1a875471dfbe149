"""Loss gaps of standard and adversarially robust linear classifiers on Gaussian data."""

from lossgap.analytic import (
    GaussianSpec,
    Ordering,
    Regime,
    compare_rob_std,
    eps_regime,
    loss_gap_rob,
    loss_gap_std,
    rob_minimum,
    rob_root,
)

__all__ = [
    "GaussianSpec",
    "Ordering",
    "Regime",
    "compare_rob_std",
    "eps_regime",
    "loss_gap_rob",
    "loss_gap_std",
    "rob_minimum",
    "rob_root",
]

__version__ = "0.1.0"
