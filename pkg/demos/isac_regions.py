"""Sensing-rate / communication-rate trade-offs against orthogonal sharing.

Run: python demos/isac_regions.py
"""
import numpy as np

from malab.isac import (
    ClusterScene,
    SuMisoScene,
    TargetModel,
    dl_cluster_isac,
    dl_su_miso_isac,
    osac_region,
    region_contains,
    uplink_isac_region,
)

rng = np.random.default_rng(3)


def crandn(*shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


model = TargetModel((np.deg2rad(60), np.deg2rad(110)), (1.0, 0.5), 3, 2)
up = uplink_isac_region(crandn(2, 2), [2.0, 1.0], crandn(3, 8), model.response_covariance())
print(f"uplink  C-SIC (SR {up.c_sic.sr:.3f}, CR {up.c_sic.cr:.3f})  "
      f"S-SIC (SR {up.s_sic.sr:.3f}, CR {up.s_sic.cr:.3f})  "
      f"contains OSAC: {region_contains(up.points, up.osac)}")

scene = SuMisoScene(crandn(4), np.deg2rad(50), 1.0, 10.0, 2, 8)
su = dl_su_miso_isac(scene)
print("\nSU-MISO rate-profile boundary")
for a, p in zip(su.alphas, su.pareto):
    print(f"  alpha {a:.1f}: SR {p.sr:.4f}  CR {p.cr:.4f}")
print("  contains OSAC:", region_contains(su.pareto, osac_region(su.sc.sr, su.cc.cr)))

clusters = [[crandn(3, 3) for _ in range(2)] for _ in range(3)]
cl = dl_cluster_isac(ClusterScene(clusters, model.transmit_correlation(), 10.0, 2, 8))
print(f"\ncluster NOMA  C-C (SR {cl.cc.sr:.3f}, CR {cl.cc.cr:.3f})  S-C (SR {cl.sc.sr:.3f}, CR {cl.sc.cr:.3f})"
      f"  contains OSAC: {region_contains(cl.points, cl.osac)}")
