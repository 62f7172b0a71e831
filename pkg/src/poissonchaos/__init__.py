"""Diagram partitions, product formulas and cumulant bounds for Poisson chaos."""
