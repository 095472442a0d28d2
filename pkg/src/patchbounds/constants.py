"""Physical constants (CODATA 2018), fixed so outputs are bit-stable."""
import math

EPS0 = 8.8541878128e-12  # F/m
MU0 = 1.25663706212e-6  # H/m
C0 = 1.0 / math.sqrt(EPS0 * MU0)  # m/s
Z0 = math.sqrt(MU0 / EPS0)  # ohm
