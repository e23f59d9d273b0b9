"""Determinantal machinery of noncolliding squared Bessel processes."""
