"""Probabilistic trace alignment against stochastic workflow nets."""
