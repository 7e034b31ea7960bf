# src/__init__.py
# Left empty to avoid circular imports between the engine modules
