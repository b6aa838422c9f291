"""Experiment runner: figure reproductions and theorem sweeps."""
