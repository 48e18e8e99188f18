"""
Exact column generation solver for discrete Wasserstein barycenters.
"""

__version__ = '0.1.0'
