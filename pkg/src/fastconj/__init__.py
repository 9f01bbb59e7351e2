"""Finite-stage fast approximation by conjugation for circle diffeomorphisms."""

import sys

# Denominators of deep approximants run to hundreds of thousands of digits.
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)

__version__ = "0.1.0"
