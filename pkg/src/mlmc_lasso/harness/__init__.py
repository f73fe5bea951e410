"""Experiment pipeline and command-line interface."""
