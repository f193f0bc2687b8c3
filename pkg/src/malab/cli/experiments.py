"""Registry of runnable experiments.

Each experiment declares the fields it reads from a scenario file and a
``run(config, pmap)`` function returning a :class:`ResultTable`. ``pmap``
is an order-preserving map used for every loop over independent grid
points, so the output never depends on the worker count. Random draws are
keyed by the scenario seed and the grid coordinates, never by call order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import beamforming as bf
from .. import capacity, channels, isac, nearfield, noma
from ..foundation import ArrayGeometry, Position, keyed_rng, linear_to_db
from .config import Field
from .table import ResultTable

@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    run: object
    schema: dict
    checks: tuple = field(default_factory=tuple)


REGISTRY: dict = {}


def experiment(name, description, schema, checks=()):
    def register(func):
        REGISTRY[name] = Experiment(name, description, func, schema, tuple(checks))
        return func

    return register


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def positions(cfg):
    return [Position(u["range"], u["angle"]) for u in cfg.users]


POSITION_FIELDS = {"range": Field("length", low=1e-9), "angle": Field("angle", np.pi / 2)}


# capacity ----------------------------------------------------------------------

def _sorted_noise(geometry, users, noise, params):
    levels = noise["levels"]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ValueError("noise.levels: must be sorted ascending (strongest user first)")


@experiment(
    "bc-region",
    "Scalar Gaussian broadcast channel: superposition-coding boundary vs TDMA",
    {
        "noise": {"levels": Field("power_list")},
        "params": {"power": Field("power"), "resolution": Field("int", 101, low=2)},
    },
    checks=(_sorted_noise,),
)
def run_bc_region(cfg, pmap):
    levels = cfg.noise["levels"]
    power, res = cfg.params["power"], cfg.params["resolution"]
    k = len(levels)
    table = ResultTable(["scheme"] + [f"share_{i + 1}" for i in range(k)] + [f"rate_{i + 1}" for i in range(k)])
    shares = capacity.simplex_grid(k, res)
    noma_rates = np.atleast_2d(capacity.scalar_bc_rates(shares, power, levels))
    oma = capacity.oma_region(power, levels, res).points
    for share, rate in zip(shares, noma_rates):
        table.append("noma", *map(float, share), *map(float, rate))
    for share, rate in zip(shares, oma):
        table.append("oma", *map(float, share), *map(float, rate))
    return table


@experiment(
    "mac-region",
    "Vector MAC: successive-decoding corner points for every order on one channel draw",
    {
        "geometry": {"antennas": Field("int", low=1)},
        "noise": {"power": Field("power", 1.0)},
        "users": ({"power": Field("power")}, 2, 6),
    },
)
def run_mac_region(cfg, pmap):
    n = cfg.geometry["antennas"]
    k = len(cfg.users)
    hs = [crandn(keyed_rng(cfg.seed, user), n, 1) for user in range(k)]
    covs = [np.array([[u["power"]]]) for u in cfg.users]
    orders = list(itertools.permutations(range(k)))
    rows = pmap(lambda order: capacity.mac_sic_corner(hs, covs, cfg.noise["power"], order), orders)
    table = ResultTable(["order"] + [f"rate_{i + 1}" for i in range(k)] + ["sum_rate"])
    for order, rates in zip(orders, rows):
        table.append(">".join(str(u + 1) for u in order), *map(float, rates), float(rates.sum()))
    table.metadata["sum_capacity"] = repr(capacity.mac_sum_rate(hs, covs, cfg.noise["power"]))
    return table


@experiment(
    "iwf-mac",
    "Iterative water-filling sum capacity of a multi-antenna MAC",
    {
        "geometry": {"antennas": Field("int", low=1)},
        "noise": {"power": Field("power", 1.0)},
        "params": {
            "users": Field("int", low=1),
            "user_antennas": Field("int", 2, low=1),
            "budget": Field("power"),
            "max_iter": Field("int", 500, low=1),
        },
    },
)
def run_iwf_mac(cfg, pmap):
    p = cfg.params
    n = cfg.geometry["antennas"]
    hs = [crandn(keyed_rng(cfg.seed, user), n, p["user_antennas"]) for user in range(p["users"])]
    res = capacity.iwf_mac(hs, [p["budget"]] * p["users"], cfg.noise["power"], max_iter=p["max_iter"])
    table = ResultTable(["iteration", "sum_rate"])
    for i, value in enumerate(res.history):
        table.append(i, float(value))
    table.metadata["sum_capacity"] = repr(float(res.sum_capacity))
    table.metadata["kkt_residual"] = repr(float(res.kkt_residual))
    return table


# beamforming -----------------------------------------------------------------

@experiment(
    "beamforming-compare",
    "Average sum rate of linear precoders/combiners over i.i.d. Rayleigh draws",
    {
        "geometry": {"antennas": Field("int", low=1)},
        "params": {
            "users": Field("int", low=1),
            "snr": Field("power_list"),
            "draws": Field("int", 20, low=1),
            "link": Field("choice", "downlink", choices=("downlink", "uplink")),
        },
    },
)
def run_beamforming_compare(cfg, pmap):
    p = cfg.params
    n, k = cfg.geometry["antennas"], p["users"]
    methods = bf.DOWNLINK_METHODS if p["link"] == "downlink" else bf.UPLINK_METHODS

    def point(args):
        snr_index, snr = args
        totals = np.zeros(len(methods))
        for draw in range(p["draws"]):
            h = crandn(keyed_rng(cfg.seed, draw), n, k)
            for m, method in enumerate(methods):
                if p["link"] == "downlink":
                    pre = bf.downlink_precoder(h, method, snr / k, 1.0)
                    totals[m] += bf.downlink_rates(h, pre, noise=1.0).sum()
                else:
                    v = bf.uplink_combiner(h, snr, 1.0, method)
                    totals[m] += bf.uplink_rates(h, v, snr, 1.0).sum()
        return totals / p["draws"]

    snrs = list(enumerate(p["snr"]))
    results = pmap(point, snrs)
    table = ResultTable(["snr_db", "method", "sum_rate"])
    for (_, snr), row in zip(snrs, results):
        for method, value in zip(methods, row):
            table.append(float(linear_to_db(snr)), method, float(value))
    return table


@experiment(
    "noma-clusterfree",
    "Cluster-free NOMA vs SDMA with MRT beams on sparse Rician channels",
    {
        "geometry": {"antennas": Field("odd"), "spacing": Field("length"), "wavelength": Field("length", None),
                     "frequency": Field("frequency", None)},
        "noise": {"power": Field("power", 1.0)},
        "users": ({**POSITION_FIELDS, "power": Field("power")}, 2, 16),
        "params": {"k_factor": Field("float", 10.0, low=0), "paths": Field("int", 4, low=1),
                   "threshold": Field("float", 0.5, low=0, high=1)},
    },
)
def run_noma_clusterfree(cfg, pmap):
    g = cfg.geometry
    geom = ArrayGeometry(g["antennas"], g["spacing"], g["wavelength"])
    pos = positions(cfg)
    h = np.column_stack([
        channels.rician_sparse(geom, q, channels.RicianParams.sample(
            cfg.params["k_factor"], cfg.params["paths"], q.angle_theta, cfg.seed, user)).entries
        for user, q in enumerate(pos)
    ])
    w = h / np.linalg.norm(h, axis=0)
    p = np.array([u["power"] for u in cfg.users])
    sigma2 = cfg.noise["power"]
    assign = noma.clusters_by_correlation(h, cfg.params["threshold"])
    order = noma.order_by_effective_gain(h, w, assign)
    res = noma.noma_rates(h, w, p, sigma2, order, assign)
    sdma = bf.downlink_rates(h, w, p, sigma2)
    labels = assign.labels()
    table = ResultTable(["user", "cluster", "rate_sdma", "rate_noma", "sic_feasible"])
    for user in range(h.shape[1]):
        table.append(user + 1, int(labels[user]) + 1, float(sdma[user]), float(res.rates[user]),
                     int(res.sic_feasible))
    return table


# far field ---------------------------------------------------------------------

@experiment(
    "favorable-propagation-sweep",
    "Channel correlation of two users versus array size (far field and near field)",
    {
        "geometry": {"antennas": Field("int_list", low=2), "spacing": Field("length"),
                     "wavelength": Field("length", None), "frequency": Field("frequency", None)},
        "users": (POSITION_FIELDS, 2, 2),
    },
)
def run_favorable(cfg, pmap):
    g = cfg.geometry
    p1, p2 = positions(cfg)

    def point(n):
        geom = ArrayGeometry(n, g["spacing"], g["wavelength"], allow_even=True)
        far = channels.correlation_rho(channels.farfield_los(geom, p1).entries, channels.farfield_los(geom, p2).entries)
        near = channels.correlation_rho(channels.nearfield_spd(geom, p1).entries,
                                        channels.nearfield_spd(geom, p2).entries)
        return far, near, channels.nearfield_rho_closed(geom, p1, p2)

    table = ResultTable(["antennas", "rho_farfield", "rho_nearfield", "rho_nearfield_closed"])
    for n, row in zip(g["antennas"], pmap(point, g["antennas"])):
        table.append(n, *map(float, row))
    return table


@experiment(
    "beamspace-map",
    "DFT beamspace magnitudes of sparse Rician channels",
    {
        "geometry": {"antennas": Field("int", low=2), "wavelength": Field("length", None),
                     "frequency": Field("frequency", None)},
        "users": (POSITION_FIELDS, 1, 64),
        "params": {"k_factor": Field("float", 20.0, low=0), "paths": Field("int", 4, low=1),
                   "path_gains": Field("choice", "random", choices=("random", "unit"))},
    },
)
def run_beamspace(cfg, pmap):
    wl = cfg.geometry["wavelength"]
    geom = ArrayGeometry(cfg.geometry["antennas"], wl / 2, wl, allow_even=True)
    pos = positions(cfg)
    h = np.column_stack([
        channels.rician_sparse(geom, q, channels.RicianParams.sample(
            cfg.params["k_factor"], cfg.params["paths"], q.angle_theta, cfg.seed, user,
            unit_gains=cfg.params["path_gains"] == "unit")).entries
        for user, q in enumerate(pos)
    ])
    res = channels.beamspace_transform(h, geom)
    frac = res.energy_fraction()
    power = np.abs(res.matrix) ** 2
    table = ResultTable(["user", "beam", "power", "dominant", "energy_fraction"])
    for user in range(h.shape[1]):
        for beam in range(geom.n_antennas):
            table.append(user + 1, beam + 1, float(power[beam, user]),
                         int(beam + 1 == res.dominant_index[user]), float(frac[user]))
    table.metadata["unitarity_error"] = repr(float(np.abs(res.transform @ res.transform.conj().T
                                                          - np.eye(geom.n_antennas)).max()))
    return table


# near field --------------------------------------------------------------------

@experiment(
    "nearfield-analog-snr",
    "Analog-beamforming SNR versus array size: direct sum and closed forms",
    {
        "geometry": {"spacing": Field("length"), "wavelength": Field("length", None),
                     "frequency": Field("frequency", None)},
        "params": {"ranges": Field("length_list", low=1e-9), "max_antennas": Field("odd", low=3),
                   "stride": Field("int", 50, low=1), "snr": Field("power", 1.0)},
    },
)
def run_nearfield_snr(cfg, pmap):
    g, p = cfg.geometry, cfg.params
    d, wl = g["spacing"], g["wavelength"]

    def point(r):
        counts, snr = nearfield.analog_snr_curve(d, wl, r, p["max_antennas"], power=p["snr"])
        best = int(np.argmax(snr))
        keep = sorted(set(range(0, len(counts), p["stride"])) | {best, len(counts) - 1})
        rows = []
        for i in keep:
            geom = ArrayGeometry(int(counts[i]), d, wl)
            rows.append((r, int(counts[i]), float(snr[i]),
                         nearfield.analog_snr_closed(geom, r, power=p["snr"], variant="squared"),
                         nearfield.analog_snr_closed(geom, r, power=p["snr"], variant="printed"),
                         int(i == best)))
        return rows, nearfield.radiating_antenna_limit(r, d, wl), int(counts[best])

    table = ResultTable(["range", "antennas", "snr_direct", "snr_squared", "snr_printed", "argmax"])
    for r, (rows, n_rad, n_best) in zip(p["ranges"], pmap(point, p["ranges"])):
        for row in rows:
            table.append(*row)
        table.metadata[f"r={r!r}"] = (f"argmax={n_best} n_rad={n_rad!r} reference_3.728r/d={3.728 * r / d!r}")
    return table


@experiment(
    "nearfield-hb-sdma",
    "Hybrid SDMA sum rate with near-field and far-field beam design",
    {
        "geometry": {"antennas": Field("odd_list", low=1), "spacing": Field("length"),
                     "wavelength": Field("length", None), "frequency": Field("frequency", None)},
        "users": (POSITION_FIELDS, 1, 16),
        "params": {"snr": Field("power")},
    },
)
def run_hb_sdma(cfg, pmap):
    g = cfg.geometry
    pos = positions(cfg)
    snr = cfg.params["snr"]

    def point(n):
        geom = ArrayGeometry(n, g["spacing"], g["wavelength"])
        return (nearfield.nearfield_hb_sdma_sumrate(pos, geom, snr, 1.0, "nearfield-exact"),
                nearfield.nearfield_hb_sdma_sumrate(pos, geom, snr, 1.0, "farfield"))

    table = ResultTable(["antennas", "sum_rate_nearfield", "sum_rate_farfield"])
    for n, (near, far) in zip(g["antennas"], pmap(point, g["antennas"])):
        table.append(n, near, far)
    return table


@experiment(
    "cap-sinr",
    "Continuous-aperture array SINR with matched currents versus aperture length",
    {
        "geometry": {"apertures": Field("length_list", low=1e-9), "wavelength": Field("length", None),
                     "frequency": Field("frequency", None)},
        "noise": {"power": Field("power")},
        "users": (POSITION_FIELDS, 1, 8),
        "params": {"power": Field("power")},
    },
)
def run_cap_sinr(cfg, pmap):
    pos = positions(cfg)
    wl, power = cfg.geometry["wavelength"], cfg.params["power"]

    def point(length):
        ap = nearfield.CapAperture(length, wl)
        currents = [nearfield.cap_matched_current(q, ap, power / len(pos)) for q in pos]
        return nearfield.cap_sinr(ap, currents, pos, cfg.noise["power"], power)

    table = ResultTable(["aperture", "user", "sinr", "rate"])
    for length, sinr in zip(cfg.geometry["apertures"], pmap(point, cfg.geometry["apertures"])):
        for user, s in enumerate(sinr):
            table.append(length, user + 1, float(s), float(np.log2(1 + s)))
    return table


# ISAC ----------------------------------------------------------------------------

def _sr_cr_table(points):
    table = ResultTable(["label", "sr", "cr"])
    for p in points:
        table.append(p.label, float(p.sr), float(p.cr))
    return table


def _targets_match(geometry, users, noise, params):
    if len(params["target_angles"]) != len(params["target_variances"]):
        raise ValueError("params.target_variances: need one variance per target angle")


TARGET_FIELDS = {
    "target_angles": Field("angle_list"),
    "target_variances": Field("float_list", low=0),
}


@experiment(
    "isac-uplink-region",
    "Uplink NOMA-ISAC: C-SIC and S-SIC corners, time sharing and the OSAC baseline",
    {
        "params": {
            **TARGET_FIELDS,
            "tx_antennas": Field("int", low=1), "rx_antennas": Field("int", low=1),
            "users": Field("int", low=1), "length": Field("int", low=1),
            "user_power": Field("power"), "sensing_power": Field("power"),
            "grid": Field("int", 11, low=2),
        },
    },
    checks=(_targets_match,),
)
def run_isac_uplink(cfg, pmap):
    p = cfg.params
    rng = keyed_rng(cfg.seed, 0)
    model = isac.TargetModel(tuple(p["target_angles"]), tuple(p["target_variances"]), p["tx_antennas"],
                             p["rx_antennas"])
    h = crandn(rng, p["rx_antennas"], p["users"])
    x = crandn(rng, p["tx_antennas"], p["length"]) * np.sqrt(p["sensing_power"] / p["tx_antennas"])
    reg = isac.uplink_isac_region(h, p["user_power"], x, model.response_covariance(), p["grid"])
    return _sr_cr_table([reg.c_sic, reg.s_sic] + reg.boundary + reg.osac)


@experiment(
    "isac-su-miso-region",
    "Downlink single-user MISO ISAC: S-C and C-C points and the rate-profile boundary",
    {
        "params": {
            "tx_antennas": Field("int", low=1), "rx_antennas": Field("int", low=1),
            "length": Field("int", low=1), "target_angle": Field("angle"),
            "target_variance": Field("float", 1.0, low=0), "power": Field("power"),
            "alphas": Field("float_list", [round(0.1 * i, 10) for i in range(11)], low=0, high=1),
        },
    },
)
def run_isac_su_miso(cfg, pmap):
    p = cfg.params
    h_c = crandn(keyed_rng(cfg.seed, 0), p["tx_antennas"])
    scene = isac.SuMisoScene(h_c, p["target_angle"], p["target_variance"], p["power"], p["rx_antennas"],
                             p["length"])
    beams = pmap(lambda a: isac.su_miso_pareto_beam(scene, a), p["alphas"])
    sc = scene.rates(scene.h_s / np.linalg.norm(scene.h_s))
    cc = scene.rates(scene.h_c / np.linalg.norm(scene.h_c))
    table = ResultTable(["label", "alpha", "sr", "cr"])
    table.append("S-C", 1.0, float(sc[0]), float(sc[1]))
    table.append("C-C", 0.0, float(cc[0]), float(cc[1]))
    for a, w in zip(p["alphas"], beams):
        sr, cr = scene.rates(w)
        table.append("pareto", float(a), float(sr), float(cr))
    return table


def _cluster_dims(geometry, users, noise, params):
    if params["user_antennas"] < params["tx_antennas"]:
        raise ValueError("params.user_antennas: user-side zero forcing needs N_U >= N_Cluster "
                         f"({params['user_antennas']} < {params['tx_antennas']})")


@experiment(
    "isac-cluster-region",
    "Downlink cluster-based MIMO-NOMA ISAC region against OSAC",
    {
        "noise": {"power": Field("power", 1.0)},
        "params": {
            **TARGET_FIELDS,
            "tx_antennas": Field("int", low=1), "rx_antennas": Field("int", low=1),
            "user_antennas": Field("int", low=1), "users_per_cluster": Field("int", 2, low=1),
            "length": Field("int", low=1), "power": Field("power"),
            "alphas": Field("float_list", [round(0.1 * i, 10) for i in range(11)], low=0, high=1),
            "taus": Field("float_list", [round(0.1 * i, 10) for i in range(11)], low=0, high=1),
        },
    },
    checks=(_targets_match, _cluster_dims),
)
def run_isac_cluster(cfg, pmap):
    p = cfg.params
    rng = keyed_rng(cfg.seed, 0)
    model = isac.TargetModel(tuple(p["target_angles"]), tuple(p["target_variances"]), p["tx_antennas"],
                             p["rx_antennas"])
    clusters = [[crandn(rng, p["tx_antennas"], p["user_antennas"]) for _ in range(p["users_per_cluster"])]
                for _ in range(p["tx_antennas"])]
    scene = isac.ClusterScene(clusters, model.transmit_correlation(), p["power"], p["rx_antennas"],
                              p["length"], cfg.noise["power"])
    w_c, p_c = isac.cluster_cc_design(scene, p["taus"])
    w_s, p_s = isac.cluster_sc_design(scene)
    cc = isac.cluster_point(scene, w_c, p_c, "C-C")
    sc = isac.cluster_point(scene, w_s, p_s, "S-C")
    pareto = pmap(lambda a: isac.cluster_pareto_point(scene, a, p["taus"]), p["alphas"])
    return _sr_cr_table([cc, sc] + pareto + isac.osac_region(sc.sr, cc.cr, len(p["alphas"])))


@experiment(
    "isac-siso-noma-region",
    "Downlink SISO NOMA-ISAC: full-power rectangle",
    {
        "noise": {"power": Field("power", 1.0)},
        "params": {"power": Field("power"), "near_gain": Field("float", low=0), "far_gain": Field("float", low=0),
                   "target_variance": Field("float", 1.0, low=0), "length": Field("int", low=1),
                   "grid": Field("int", 11, low=2)},
    },
)
def run_isac_siso(cfg, pmap):
    p = cfg.params
    res = isac.dl_siso_noma_isac(p["power"], (p["near_gain"], p["far_gain"]), p["target_variance"], p["length"],
                                 cfg.noise["power"], p["grid"])
    table = ResultTable(["split", "sr", "rate_near", "rate_far", "cr"])
    for s, rn, rf in zip(res.splits, res.near_rates, res.far_rates):
        table.append(float(s), float(res.sr), float(rn), float(rf), float(rn + rf))
    return table


def list_experiments():
    return [(name, REGISTRY[name].description) for name in sorted(REGISTRY)]
