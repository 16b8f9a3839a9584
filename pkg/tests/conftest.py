"""Pytest configuration; keeps the tests directory importable (helpers, oracles)."""
