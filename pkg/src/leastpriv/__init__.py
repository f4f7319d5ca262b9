"""Exact leakage measures, certification and audits for least-privilege learning."""
__version__ = "0.1.0"
