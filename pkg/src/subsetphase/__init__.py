"""Bit-packed simulation and statistical verification of random
multi-controlled circuits acting on ensembles of distinct bitstrings
and on exact subset phase states."""

__version__ = "0.1.0"
