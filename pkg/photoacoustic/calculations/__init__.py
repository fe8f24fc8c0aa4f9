"""Numerical modules: special functions, harmonics, Volterra solvers, forward and inverse solvers."""
