"""Multifractal detrended cross-correlation analysis of synchronized time series."""

__version__ = "0.1.0"
