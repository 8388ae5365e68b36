"""Numerical laboratory for competing elliptic systems with group segregation."""
