"""Hedging-language confidence benchmark and calibration evaluation toolkit."""

__version__ = "0.1.0"
