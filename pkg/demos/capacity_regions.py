"""Superposition coding against time sharing, and where the MAC sum capacity sits.

Run: python demos/capacity_regions.py
"""
import numpy as np

from malab.capacity import iwf_mac, mac_sic_corner, mac_sum_rate, scalar_bc_region

rng = np.random.default_rng(0)

# Two-user degraded broadcast channel, the weak user 7 dB below the strong one.
power, noise = 10.0, np.array([1.0, 5.0])
noma = scalar_bc_region(power, noise, 11).points
c1, c2 = np.log2(1 + power / noise)
print("strong-user rate  NOMA weak-user rate  TDMA weak-user rate")
for r1, r2 in noma:
    print(f"{r1:16.3f}  {r2:19.3f}  {max(1 - r1 / c1, 0.0) * c2:19.3f}")

# Uplink: every successive-decoding order lands on the same sum rate.
hs = [(rng.standard_normal((4, 1)) + 1j * rng.standard_normal((4, 1))) / np.sqrt(2) for _ in range(3)]
covs = [np.array([[p]]) for p in (3.0, 1.0, 0.3)]
for order in [(0, 1, 2), (2, 1, 0), (1, 2, 0)]:
    rates = mac_sic_corner(hs, covs, 1.0, order)
    print("order", order, "rates", np.round(rates, 4), "sum", round(rates.sum(), 12))
print("log det sum rate", round(mac_sum_rate(hs, covs, 1.0), 12))

# Multi-antenna users: iterative water-filling climbs to the sum capacity.
hs = [(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) / np.sqrt(2) for _ in range(3)]
res = iwf_mac(hs, [5.0, 5.0, 5.0], 1.0)
print("IWF objective per cycle:", np.round(res.history, 6))
print(f"converged in {res.iterations} cycles, KKT residual {res.kkt_residual:.1e}")
