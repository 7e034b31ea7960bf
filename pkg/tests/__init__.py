# tests/__init__.py
"""
Tests for the OOFSK capacity engine
"""
