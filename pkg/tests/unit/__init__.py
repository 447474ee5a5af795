"""Unit tests for skillbasis."""
