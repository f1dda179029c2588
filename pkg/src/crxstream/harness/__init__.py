"""Experiment runner, offline analysis, calibration and the ``crx`` command line."""
