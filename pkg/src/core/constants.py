"""Physical constants used across the simulator (CODATA via scipy)."""

import scipy.constants as sc

H = sc.h
HBAR = sc.hbar
C = sc.c
E_CHARGE = sc.e
K_B = sc.k
EPSILON_0 = sc.epsilon_0
ATOMIC_MASS = sc.atomic_mass
ELECTRON_MASS = sc.m_e
EV = sc.electron_volt

# Ca+ 4s 2S1/2 - 4p 2P1/2 natural linewidth (rad/s)
CA_ION_397_GAMMA = 2.0 * sc.pi * 20.7e6

MBAR_TO_PA = 100.0
