"""Bubble diagnostics for price series: FTS/LPPL calibration, drawdowns and crashes, synthetic markets."""

__version__ = "0.1.0"
