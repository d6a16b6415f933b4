"""Fixture exporter: train, quantize, and write QNNC containers.

This package is deliberately independent of the codec library; it talks
to it only through the QNNC file format and the vector-file conventions,
so the files it emits double as a cross-implementation check.
"""

from .build import FixtureSpec, build_fixture

__all__ = ["FixtureSpec", "build_fixture"]
