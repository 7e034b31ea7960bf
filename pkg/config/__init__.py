# config/__init__.py
"""
Global configuration for the OOFSK capacity engine
"""
