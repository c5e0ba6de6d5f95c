"""Conflict probability from first-passage time distributions, with baselines and a Monte Carlo oracle."""
