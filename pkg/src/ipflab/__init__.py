"""Simulation laboratory for iterative partial fulfillment (IPF) of counterfactual explanations."""

__version__ = "0.1.0"
