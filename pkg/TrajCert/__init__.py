"""
TrajCert - A framework for coupled-trajectory stability diagnostics.
"""

__version__ = "0.1.0"
