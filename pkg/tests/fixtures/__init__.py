"""Test fixtures for skillbasis."""
