"""skillbasis test suite."""
