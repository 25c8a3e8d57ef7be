"""Monte-Carlo sparse-sampling evaluation of reconstruction methods.

Each iteration draws M measurement locations uniformly without
replacement from the test campaign, reconstructs the field at the
remaining n - M locations, and scores RMSE in dB against the measured
values there.  The median over iterations is the headline number.
Model fitting (correlation, variance split, normal-score transform,
gain calibration) only ever sees the training campaign; the test
campaign contributes the M sampled inputs per iteration plus the
held-out values at scoring time, nothing else.

Iterations use independent RNG streams derived from (seed, index), so
results are bit-identical no matter how many worker threads run them.
"""

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .calibration import delta_gain, estimate_a_uav, estimate_effective_pattern
from .completion import McAssistedGpr, McConfig
from .errors import FitDiverged, InsufficientData, ParseError, RangeError
from .geo import GeoPoint, _arc_distance, link_geometry_batch
from .gpr import estimate_hyperparameters, gpr_fit, gpr_predict_batch
from .kriging import normal_score, solve_ordinary, solve_simple
from .propagation import PropagationConfig, trpl_received_power_db
from .scenes import MEASUREMENT_CSV_HEADER
from .shadowing import (
    CorrelationModel,
    Measurement,
    SampleSet,
    empirical_correlation,
    extract_sf,
    fit_correlation_model,
    transformed_model,
)

METHODS = ("TRPL_only", "OK", "SK", "TG_OK", "TG_SK", "GPR", "MC_GPR")
ELEVATION_BIN_DEG = 10.0
ELEVATION_BIN_COUNT = 9  # centers 5, 15, ..., 85 degrees


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation protocol settings.

    ``train_campaign`` / ``test_campaign`` may be CSV paths or in-memory
    measurement lists.  ``corr_model`` / ``sigma_split`` / ``delta``
    override the train-campaign fits when supplied; otherwise everything
    a method needs is fitted from the training campaign.
    """

    gs: GeoPoint
    prop: PropagationConfig
    test_campaign: object
    method: str = "OK"
    calibrated: bool = False
    m_samples: int = 100
    radius_m: float = 200.0
    iterations: int = 5000
    seed: int = 0
    train_campaign: object = None
    workers: int = 1
    jitter: float = 1e-6
    mean_z: Optional[float] = None
    corr_model: Optional[CorrelationModel] = None
    sigma_split: Optional[tuple] = None
    delta: object = None
    calibration_bin_deg: float = 5.0
    calibration_min_support: int = 25
    mc: McConfig = field(default_factory=McConfig)
    dh_edges: object = None
    dv_edges: object = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.m_samples < 1:
            raise ValueError("m_samples must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class EvaluationReport:
    """Self-describing evaluation outcome."""

    method: str
    calibrated: bool
    rmse_db: list
    median_rmse_db: float
    elevation_bin_centers: list
    elevation_bin_rmse_db: list
    counters: dict
    n_train: int
    n_test: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "calibrated": self.calibrated,
            "median_rmse_db": self.median_rmse_db,
            "rmse_db": list(self.rmse_db),
            "elevation_bin_centers": list(self.elevation_bin_centers),
            "elevation_bin_rmse_db": list(self.elevation_bin_rmse_db),
            "counters": dict(self.counters),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "config": self.config,
        }


class CampaignValues:
    """Read seam for test-campaign measured values.

    The evaluator touches held-out values only through ``take``; tests
    swap in a counting subclass to audit train/test separation.
    """

    def __init__(self, values):
        self._values = np.asarray(values, dtype=float)

    def __len__(self):
        return len(self._values)

    def take(self, indices) -> np.ndarray:
        return self._values[np.asarray(indices)]


def ingest_measurements(path):
    """Parse a measurement CSV (`seq,lat_deg,lon_deg,alt_m,rsrp_dbm`).

    Raises:
        ParseError: malformed header or row, with the line number.
        RangeError: latitude/longitude outside valid ranges.
    """
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MEASUREMENT_CSV_HEADER:
            raise ParseError(
                f"expected header {','.join(MEASUREMENT_CSV_HEADER)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(
                    f"expected 5 columns, got {len(row)}", line=lineno
                )
            try:
                seq = int(row[0])
                lat, lon, alt, rsrp = (float(v) for v in row[1:])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not np.isfinite(rsrp):
                raise ParseError("rsrp_dbm is not finite", line=lineno)
            try:
                loc = GeoPoint(lat, lon, alt)
            except RangeError as exc:
                raise RangeError(f"line {lineno}: {exc}") from None
            out.append(Measurement(loc, rsrp, seq=seq))
    return out


def _load_campaign(campaign):
    if campaign is None:
        return None
    if isinstance(campaign, (str, os.PathLike)):
        ms = ingest_measurements(campaign)
    else:
        ms = list(campaign)
    # canonical order: permuting file rows must not change anything
    ms.sort(key=lambda m: (m.seq, m.location.lat_deg, m.location.lon_deg,
                           m.location.alt_m))
    return ms


def _campaigns_identical(a, b):
    if a is None or b is None:
        return False
    if len(a) != len(b):
        return False
    return all(
        x.location == y.location and x.rsrp_dbm == y.rsrp_dbm
        for x, y in zip(a, b)
    )


@dataclass
class _FittedModels:
    corr: Optional[CorrelationModel] = None
    corr_u: Optional[CorrelationModel] = None
    transform: object = None
    sigma_y: float = 0.0
    sigma_gp: float = 0.0
    mean_z: float = 0.0
    delta: object = None


def _fit_from_train(cfg: EvalConfig, train):
    """Fit whatever the chosen method needs, from the training campaign only."""
    models = _FittedModels()
    needs_corr = cfg.method != "TRPL_only"
    needs_delta = cfg.calibrated

    if needs_delta:
        if cfg.delta is not None:
            models.delta = cfg.delta
        else:
            if train is None:
                raise ValueError("calibrated evaluation needs a train campaign")
            ratios = estimate_a_uav(train, cfg.prop, cfg.gs, campaign="train")
            eff = estimate_effective_pattern(
                ratios, cfg.prop.gs_pattern,
                bin_deg=cfg.calibration_bin_deg,
                min_support=cfg.calibration_min_support,
            )
            models.delta = delta_gain(eff, cfg.prop.uav_pattern)

    if not needs_corr:
        return models

    sf_train = None
    if train is not None:
        sf_train = extract_sf(train, cfg.prop, cfg.gs, delta_gain=models.delta)

    if cfg.corr_model is not None:
        models.corr = cfg.corr_model
    else:
        if sf_train is None:
            raise ValueError(
                f"method {cfg.method} needs a train campaign or corr_model"
            )
        table = empirical_correlation(
            sf_train, dh_edges=cfg.dh_edges, dv_edges=cfg.dv_edges
        )
        models.corr = fit_correlation_model(table)

    if sf_train is not None:
        zt = np.array([s.z for s in sf_train])
        models.mean_z = float(np.mean(zt))
    if cfg.mean_z is not None:
        models.mean_z = cfg.mean_z

    if cfg.method in ("GPR", "MC_GPR"):
        if cfg.sigma_split is not None:
            models.sigma_y, models.sigma_gp = cfg.sigma_split
        elif sf_train is not None:
            models.sigma_y, models.sigma_gp = estimate_hyperparameters(
                sf_train, models.corr,
                dh_edges=cfg.dh_edges, dv_edges=cfg.dv_edges,
            )
        else:
            models.sigma_y, models.sigma_gp = models.corr.sigma_z, 0.0

    if cfg.method in ("TG_OK", "TG_SK"):
        if sf_train is None:
            raise ValueError("TG variants need a train campaign")
        try:
            models.transform = normal_score(sf_train)
        except InsufficientData:
            warnings.warn(
                "train campaign too small for a normal-score transform; "
                "falling back to the plain kriging variant"
            )
            models.transform = None
        if models.transform is not None:
            u_samples = SampleSet(
                [s.location.lat_deg for s in sf_train],
                [s.location.lon_deg for s in sf_train],
                [s.location.alt_m for s in sf_train],
                models.transform.forward(np.array([s.z for s in sf_train])),
                [s.seq for s in sf_train],
            )
            try:
                table_u = empirical_correlation(
                    u_samples, dh_edges=cfg.dh_edges, dv_edges=cfg.dv_edges
                )
                models.corr_u = fit_correlation_model(table_u)
            except (InsufficientData, FitDiverged):
                # scores are near standard normal; reuse the raw-domain
                # shape at unit variance
                models.corr_u = transformed_model(models.corr, 1.0)
    return models


@dataclass
class _TestData:
    lat: np.ndarray
    lon: np.ndarray
    alt: np.ndarray
    rhat: np.ndarray
    elev_bin: np.ndarray
    values: CampaignValues
    n: int


def _prepare_test(cfg: EvalConfig, test, models, values_override=None):
    lat = np.array([m.location.lat_deg for m in test])
    lon = np.array([m.location.lon_deg for m in test])
    alt = np.array([m.location.alt_m for m in test])
    geom, valid = link_geometry_batch(cfg.gs, lat, lon, alt,
                                      cfg.prop.wavelength_m)
    if not np.all(valid):
        bad = int(np.nonzero(~valid)[0][0])
        raise ValueError(
            f"test measurement seq={test[bad].seq} coincides with the station"
        )
    rhat = trpl_received_power_db(cfg.prop, geom)
    if cfg.calibrated and models.delta is not None:
        rhat = rhat + models.delta.delta_at(geom.phi_r, geom.theta_r)
    elev = np.asarray(geom.theta_t)
    elev_bin = np.clip(
        np.floor(elev / ELEVATION_BIN_DEG).astype(int), 0,
        ELEVATION_BIN_COUNT - 1,
    )
    values = values_override
    if values is None:
        values = CampaignValues([m.rsrp_dbm for m in test])
    return _TestData(lat, lon, alt, rhat, elev_bin, values, len(test))


def _residuals_ok_sk(cfg, models, data, s_idx, z_m, t_idx, counters):
    variant = cfg.method
    corr = models.corr
    lat_s, lon_s, alt_s = data.lat[s_idx], data.lon[s_idx], data.alt[s_idx]
    lat_t, lon_t, alt_t = data.lat[t_idx], data.lon[t_idx], data.alt[t_idx]
    dh_ss = _arc_distance(lat_s[:, None], lon_s[:, None],
                          lat_s[None, :], lon_s[None, :])
    dv_ss = np.abs(alt_s[:, None] - alt_s[None, :])
    dh_ts = _arc_distance(lat_t[:, None], lon_t[:, None],
                          lat_s[None, :], lon_s[None, :])
    dv_ts = np.abs(alt_t[:, None] - alt_s[None, :])
    out = np.zeros(len(t_idx))
    if variant == "OK":
        g_ss = corr.semivariogram_at(dh_ss, dv_ss)
        g_ts = corr.semivariogram_at(dh_ts, dv_ts)
        for k in range(len(t_idx)):
            nb = np.nonzero(dh_ts[k] <= cfg.radius_m)[0]
            if nb.size == 0:
                counters["fallback_targets"] += 1
                continue
            w, _mu = solve_ordinary(
                g_ss[np.ix_(nb, nb)], g_ts[k, nb], cfg.jitter
            )
            out[k] = w @ z_m[nb]
    else:
        m_z = models.mean_z
        c_ss = corr.covariance_at(dh_ss, dv_ss)
        c_ts = corr.covariance_at(dh_ts, dv_ts)
        zc = z_m - m_z
        for k in range(len(t_idx)):
            nb = np.nonzero(dh_ts[k] <= cfg.radius_m)[0]
            if nb.size == 0:
                counters["fallback_targets"] += 1
                continue
            w = solve_simple(c_ss[np.ix_(nb, nb)], c_ts[k, nb], cfg.jitter)
            out[k] = m_z + w @ zc[nb]
    return out


def _residuals_tg(cfg, models, data, s_idx, z_m, t_idx, counters):
    transform = models.transform
    corr_u = models.corr_u or models.corr
    u_m = np.asarray(transform.forward(z_m), dtype=float)
    m_u = transform.mean_u
    var_u = corr_u.sigma_z**2
    phi2 = transform.inverse_second_derivative(m_u)
    lat_s, lon_s, alt_s = data.lat[s_idx], data.lon[s_idx], data.alt[s_idx]
    lat_t, lon_t, alt_t = data.lat[t_idx], data.lon[t_idx], data.alt[t_idx]
    dh_ss = _arc_distance(lat_s[:, None], lon_s[:, None],
                          lat_s[None, :], lon_s[None, :])
    dv_ss = np.abs(alt_s[:, None] - alt_s[None, :])
    dh_ts = _arc_distance(lat_t[:, None], lon_t[:, None],
                          lat_s[None, :], lon_s[None, :])
    dv_ts = np.abs(alt_t[:, None] - alt_s[None, :])
    r_ss = corr_u.correlation_at(dh_ss, dv_ss)
    r_ts = corr_u.correlation_at(dh_ts, dv_ts)
    out = np.zeros(len(t_idx))
    tg_ok = cfg.method == "TG_OK"
    for k in range(len(t_idx)):
        nb = np.nonzero(dh_ts[k] <= cfg.radius_m)[0]
        if nb.size == 0:
            counters["fallback_targets"] += 1
            continue
        u_nb = u_m[nb]
        if tg_ok:
            g_nn = var_u * (1.0 - r_ss[np.ix_(nb, nb)])
            g_t = var_u * (1.0 - r_ts[k, nb])
            w, mu = solve_ordinary(g_nn, g_t, cfg.jitter)
            u_hat = float(w @ u_nb)
            mse_u = max(float(w @ g_t + mu), 0.0)
            out[k] = transform.inverse(u_hat) + phi2 * (mse_u / 2.0 - mu)
        else:
            c_nn = var_u * r_ss[np.ix_(nb, nb)]
            c_t = var_u * r_ts[k, nb]
            w = solve_simple(c_nn, c_t, cfg.jitter)
            u_hat = float(m_u + w @ (u_nb - m_u))
            mse_u = max(var_u - float(w @ c_t), 0.0)
            out[k] = transform.inverse(u_hat) + (phi2 / 2.0) * mse_u
    return out


def _residuals_gpr(cfg, models, data, s_idx, z_m, t_idx, counters):
    train = SampleSet(data.lat[s_idx], data.lon[s_idx], data.alt[s_idx], z_m)
    model = gpr_fit(train, models.corr, models.sigma_y, models.sigma_gp)
    if cfg.method == "GPR":
        z_hat, _var = gpr_predict_batch(
            model, data.lat[t_idx], data.lon[t_idx], data.alt[t_idx]
        )
        counters["variance_clamps"] += model.clamp_events
        return z_hat
    pipeline = McAssistedGpr(model, cfg.mc)
    counters["variance_clamps"] += model.clamp_events
    if not pipeline.mc.converged:
        counters["mc_bisection_maxed"] += 1
    return pipeline.predict(data.lat[t_idx], data.lon[t_idx])


def _run_iteration(cfg, models, data, index):
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, index)))
    sampled = rng.choice(data.n, size=cfg.m_samples, replace=False)
    mask = np.ones(data.n, dtype=bool)
    mask[sampled] = False
    targets = np.nonzero(mask)[0]
    counters = {"fallback_targets": 0, "variance_clamps": 0,
                "mc_bisection_maxed": 0}

    z_m = data.values.take(sampled) - data.rhat[sampled]
    if cfg.method == "TRPL_only":
        w_hat = np.zeros(len(targets))
    elif cfg.method in ("OK", "SK"):
        w_hat = _residuals_ok_sk(cfg, models, data, sampled, z_m, targets,
                                 counters)
    elif cfg.method in ("TG_OK", "TG_SK"):
        if models.transform is None:
            # fall back to the plain variant when no transform could be fit
            plain = replace(cfg, method=cfg.method[3:])
            w_hat = _residuals_ok_sk(plain, models, data, sampled, z_m,
                                     targets, counters)
        else:
            w_hat = _residuals_tg(cfg, models, data, sampled, z_m, targets,
                                  counters)
    else:
        w_hat = _residuals_gpr(cfg, models, data, sampled, z_m, targets,
                               counters)

    pred = data.rhat[targets] + w_hat
    measured = data.values.take(targets)
    err = pred - measured
    rmse = float(np.sqrt(np.mean(err**2)))

    bins = data.elev_bin[targets]
    sq = err**2
    bin_rmse = np.full(ELEVATION_BIN_COUNT, np.nan)
    for b in range(ELEVATION_BIN_COUNT):
        sel = bins == b
        if np.any(sel):
            bin_rmse[b] = float(np.sqrt(np.mean(sq[sel])))
    return rmse, bin_rmse, counters


def monte_carlo_eval(cfg: EvalConfig, test_values: CampaignValues = None
                     ) -> EvaluationReport:
    """Run the sparse-sampling protocol and report RMSE statistics.

    Args:
        cfg: protocol settings.
        test_values: optional replacement for the test campaign's value
            accessor (used by audits); geometry still comes from the
            campaign file.

    Raises:
        ValueError: invalid configuration, including equal train and
            test campaigns or m_samples >= test campaign size.
    """
    train = _load_campaign(cfg.train_campaign)
    test = _load_campaign(cfg.test_campaign)
    if test is None or len(test) == 0:
        raise ValueError("test campaign is empty")
    if cfg.m_samples >= len(test):
        raise ValueError(
            f"m_samples={cfg.m_samples} must be < test campaign size {len(test)}"
        )
    if _campaigns_identical(train, test):
        raise ValueError(
            "train and test campaigns are identical; the protocol requires "
            "separate campaigns"
        )
    models = _fit_from_train(cfg, train)
    data = _prepare_test(cfg, test, models, values_override=test_values)

    indices = range(cfg.iterations)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(
                lambda i: _run_iteration(cfg, models, data, i), indices
            ))
    else:
        results = [_run_iteration(cfg, models, data, i) for i in indices]

    rmse = [r[0] for r in results]
    bin_stack = np.vstack([r[1] for r in results])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        bin_median = np.nanmedian(bin_stack, axis=0)
    counters = {"fallback_targets": 0, "variance_clamps": 0,
                "mc_bisection_maxed": 0}
    for _, _, c in results:
        for key in counters:
            counters[key] += c[key]
    centers = [
        ELEVATION_BIN_DEG / 2 + ELEVATION_BIN_DEG * b
        for b in range(ELEVATION_BIN_COUNT)
    ]
    return EvaluationReport(
        method=cfg.method,
        calibrated=cfg.calibrated,
        rmse_db=rmse,
        median_rmse_db=float(np.median(rmse)),
        elevation_bin_centers=centers,
        elevation_bin_rmse_db=[
            float(v) if np.isfinite(v) else None for v in bin_median
        ],
        counters=counters,
        n_train=0 if train is None else len(train),
        n_test=len(test),
        config=_config_echo(cfg),
    )


def _config_echo(cfg: EvalConfig) -> dict:
    def campaign_repr(c):
        if c is None:
            return None
        if isinstance(c, (str, os.PathLike)):
            return str(c)
        return f"<in-memory campaign, {len(c)} rows>"

    return {
        "method": cfg.method,
        "calibrated": cfg.calibrated,
        "m_samples": cfg.m_samples,
        "radius_m": cfg.radius_m,
        "iterations": cfg.iterations,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "train_campaign": campaign_repr(cfg.train_campaign),
        "test_campaign": campaign_repr(cfg.test_campaign),
    }


SWEEP_AXES = ("M", "R", "method", "altitude_campaign")


def sweep(base: EvalConfig, axis: str, values, out_csv=None):
    """One evaluation per value along an axis; seeds offset by index.

    ``altitude_campaign`` values may be a campaign (path or list) or a
    ``(train, test)`` pair.  When ``out_csv`` is given a long-format CSV
    with one row per (value, iteration) is written for plotting.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    reports = []
    for k, value in enumerate(values):
        if axis == "M":
            cfg = replace(base, m_samples=int(value))
        elif axis == "R":
            cfg = replace(base, radius_m=float(value))
        elif axis == "method":
            cfg = replace(base, method=str(value))
        else:
            if isinstance(value, tuple) and len(value) == 2:
                cfg = replace(base, train_campaign=value[0],
                              test_campaign=value[1])
            else:
                cfg = replace(base, test_campaign=value)
        cfg = replace(cfg, seed=base.seed + k)
        reports.append(monte_carlo_eval(cfg))
    if out_csv is not None:
        _write_sweep_csv(out_csv, axis, values, reports)
    return reports


def _sweep_value_label(axis, value):
    if axis == "altitude_campaign":
        if isinstance(value, tuple):
            return "|".join(_sweep_value_label(axis, v) for v in value)
        if isinstance(value, (str, os.PathLike)):
            return str(value)
        return f"<campaign {len(value)} rows>"
    return str(value)


def _write_sweep_csv(path, axis, values, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "axis", "value", "iteration", "rmse_db", "median_rmse_db",
            "method", "calibrated", "m_samples", "radius_m", "seed",
        ])
        for value, report in zip(values, reports):
            label = _sweep_value_label(axis, value)
            for i, r in enumerate(report.rmse_db):
                writer.writerow([
                    axis, label, i, repr(r), repr(report.median_rmse_db),
                    report.config["method"], report.config["calibrated"],
                    report.config["m_samples"], report.config["radius_m"],
                    report.config["seed"],
                ])
