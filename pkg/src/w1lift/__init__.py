"""Discrete 1-Wasserstein curves, lifts and currents."""
