"""Leash-guided walking: learned motion predictors and two-stage MPC for a guide robot."""

__version__ = "0.1.0"
