"""Streaming estimation and benchmarking for autoregressive multilayer
stochastic block models."""

__version__ = "0.1.0"
