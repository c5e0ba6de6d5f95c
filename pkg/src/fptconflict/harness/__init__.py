"""Scenario files, experiment runner and command line."""
