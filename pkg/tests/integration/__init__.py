"""Integration tests for skillbasis."""
