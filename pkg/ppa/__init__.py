"""Numerical core: operators, schedules, counter-functions, iterations,
bound calculus and the verifier that ties them together."""

import sys

# bound values are reported as decimal strings far beyond the default limit
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)
