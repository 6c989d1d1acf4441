"""Coupling of a finite mean-field neuron network with its diffusion limit."""

__version__ = "0.1.0"
