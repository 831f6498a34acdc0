"""Interrupted time series intervention analysis with simultaneous inference."""
