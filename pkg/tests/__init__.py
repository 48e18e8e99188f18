"""
Tests for the barycenter solver.
"""
