"""Computational toolkit for the smooth noncommutative two-torus."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: F401
