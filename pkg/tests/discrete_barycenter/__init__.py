"""
Tests for the solver modules.
"""
