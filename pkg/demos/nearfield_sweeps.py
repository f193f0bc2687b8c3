"""Growing a broadside array: analog SNR, its closed forms, and two-user HB-SDMA.

Run: python demos/nearfield_sweeps.py
"""
import numpy as np

from malab.foundation import ArrayGeometry, Position
from malab.nearfield import (
    analog_snr_closed,
    analog_snr_direct,
    nearfield_hb_sdma_sumrate,
    radiating_antenna_limit,
    snr_sweep_extrema,
)

lam, d, r = 0.01, 0.005, 10.0
sweep = snr_sweep_extrema(d, lam, r, 40001)
print(f"r = {r} m: N_rad = {sweep.n_rad:.1f}, numerical argmax N = {sweep.argmax}, "
      f"3.728 r/d = {sweep.reference_n_star:.0f}, unimodal = {sweep.unimodal}")

print("\n    N      direct     squared     printed")
for n in (3, 11, 51, 101, 275, 1001, 13279, 40001):
    g = ArrayGeometry(n, d, lam)
    print(f"{n:5d}  {analog_snr_direct(g, r):10.5f}  {analog_snr_closed(g, r):10.5f}  "
          f"{analog_snr_closed(g, r, variant='printed'):10.5f}")

users = [Position(50, np.pi / 2), Position(20, np.pi / 2)]
print(f"\nHB-SDMA, users at 50 m and 20 m broadside, N_rad(20 m) = {radiating_antenna_limit(20, d, lam):.0f}")
print("    N   near-field   far-field")
for n in (65, 129, 201, 257, 437, 1025, 8193, 43933, 200001):
    g = ArrayGeometry(n, d, lam)
    print(f"{n:6d}  {nearfield_hb_sdma_sumrate(users, g, 10.0):10.4f}  "
          f"{nearfield_hb_sdma_sumrate(users, g, 10.0, mode='farfield'):10.4f}")
