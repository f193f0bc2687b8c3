"""Cluster-free NOMA on top of MRT beams: when does SIC pay off?

Two users at 60 and 62 degrees see nearly parallel channels, a third user
sits apart. The correlated pair forms one SIC cluster. Whether the strong
user can cancel the weak one depends on the noise floor: when interference
dominates, the cancellation condition reduces to rho^2 >= 1/rho^2.

Run: python demos/noma_sic.py
"""
import numpy as np

from malab import beamforming as bf
from malab import channels, noma
from malab.foundation import ArrayGeometry, Position, db_to_linear

geom = ArrayGeometry(9, 5.357e-3, 299792458 / 28e9)
users = [Position(20, np.deg2rad(60)), Position(40, np.deg2rad(62)), Position(30, np.deg2rad(120))]
h = np.column_stack([
    channels.rician_sparse(geom, q, channels.RicianParams.sample(10.0, 4, q.angle_theta, 7, k)).entries
    for k, q in enumerate(users)
])
w = h / np.linalg.norm(h, axis=0)
powers = db_to_linear(np.array([-6.0, 0.0, 0.0]))
clusters = noma.clusters_by_correlation(h, 0.5)
order = noma.order_by_effective_gain(h, w, clusters)
print("clusters:", clusters.clusters)
print("rho(1, 2) =", round(channels.correlation_rho(h[:, 0], h[:, 1]), 3))

for noise_db in (-60, -40, -30, -20):
    sigma2 = db_to_linear(noise_db)
    sdma = bf.downlink_rates(h, w, powers, sigma2)
    res = noma.noma_rates(h, w, powers, sigma2, order, clusters)
    print(f"noise {noise_db:4d} dB  SDMA {sdma.sum():6.3f}  NOMA {res.rates.sum():6.3f}  "
          f"SIC feasible: {res.sic_feasible}  violations: {res.violations}")
