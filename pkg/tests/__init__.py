"""
Tests for the ArduECO pipeline packages.
"""
