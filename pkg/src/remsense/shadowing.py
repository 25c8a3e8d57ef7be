"""Shadow-fading extraction and spatial-correlation estimation.

Subtracting the deterministic two-ray prediction from measured received
power leaves the shadow-fading residual.  Its spatial structure is
summarized by a separable correlation model: a two-term exponential
decay over horizontal lag blended by a mixing weight, times a single
exponential decay over vertical lag,

    R(d_h, d_v) = exp(-q d_v) * (a exp(-p1 d_h) + (1 - a) exp(-p2 d_h)).

The model is fitted to an empirical pair-product correlation table by
weighted least squares.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .errors import DegenerateLink, FitDiverged, InsufficientData, RangeError
from .geo import GeoPoint, _arc_distance, link_geometry_batch
from .propagation import (
    PropagationConfig,
    calibrated_received_power_db,
    trpl_received_power_db,
)

DEFAULT_DH_EDGES = np.arange(0.0, 401.0, 20.0)
DEFAULT_DV_EDGES = np.arange(0.0, 41.0, 10.0)
MAX_RATE_PER_M = 10.0


@dataclass(frozen=True)
class Measurement:
    """One received-power sample.

    Attributes:
        location: receiver position.
        rsrp_dbm: measured received power.
        seq: stable identifier, used for deterministic ordering.
    """

    location: GeoPoint
    rsrp_dbm: float
    seq: int = 0


@dataclass(frozen=True)
class SfSample:
    """Shadow-fading residual at one location, in dB."""

    location: GeoPoint
    z: float
    seq: int = 0


class SampleSet:
    """Column view of a list of samples, for vectorized math.

    Predictors accept either a list of :class:`SfSample` or one of
    these; building the set once amortizes the attribute walks.
    """

    __slots__ = ("lat", "lon", "alt", "z", "seq")

    def __init__(self, lat, lon, alt, z, seq=None):
        self.lat = np.asarray(lat, dtype=float)
        self.lon = np.asarray(lon, dtype=float)
        self.alt = np.asarray(alt, dtype=float)
        self.z = np.asarray(z, dtype=float)
        if seq is None:
            seq = np.arange(len(self.z))
        self.seq = np.asarray(seq)

    @classmethod
    def from_samples(cls, samples):
        if isinstance(samples, cls):
            return samples
        return cls(
            [s.location.lat_deg for s in samples],
            [s.location.lon_deg for s in samples],
            [s.location.alt_m for s in samples],
            [s.z for s in samples],
            [s.seq for s in samples],
        )

    def __len__(self):
        return len(self.z)


@dataclass(frozen=True)
class CorrelationModel:
    """Fitted parameters of the separable correlation model.

    Attributes:
        a: horizontal mixing weight in [0, 1].
        p1, p2: horizontal decay rates in 1/m (p1 >= p2 by convention).
        q: vertical decay rate in 1/m.
        sigma_z: shadow-fading standard deviation in dB.
    """

    a: float
    p1: float
    p2: float
    q: float
    sigma_z: float

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0):
            raise RangeError(f"mixing weight a={self.a} outside [0, 1]")
        if min(self.p1, self.p2, self.q) < 0.0:
            raise RangeError("decay rates must be >= 0")
        if self.sigma_z < 0.0:
            raise RangeError("sigma_z must be >= 0")

    def correlation_at(self, d_h, d_v):
        """Correlation for horizontal/vertical lags in metres."""
        d_h = np.asarray(d_h, dtype=float)
        d_v = np.asarray(d_v, dtype=float)
        return np.exp(-self.q * d_v) * (
            self.a * np.exp(-self.p1 * d_h)
            + (1.0 - self.a) * np.exp(-self.p2 * d_h)
        )

    def covariance_at(self, d_h, d_v):
        return self.sigma_z**2 * self.correlation_at(d_h, d_v)

    def semivariogram_at(self, d_h, d_v):
        return self.sigma_z**2 * (1.0 - self.correlation_at(d_h, d_v))


def _pair_lags(a: GeoPoint, b: GeoPoint):
    dh = float(_arc_distance(a.lat_deg, a.lon_deg, b.lat_deg, b.lon_deg))
    dv = abs(a.alt_m - b.alt_m)
    return dh, dv


def correlation(model: CorrelationModel, a: GeoPoint, b: GeoPoint) -> float:
    """Model correlation between two locations."""
    return float(model.correlation_at(*_pair_lags(a, b)))


def covariance(model: CorrelationModel, a: GeoPoint, b: GeoPoint) -> float:
    """Model covariance between two locations, dB^2."""
    return float(model.covariance_at(*_pair_lags(a, b)))


def semivariogram(model: CorrelationModel, a: GeoPoint, b: GeoPoint) -> float:
    """Model semivariogram between two locations, dB^2."""
    return float(model.semivariogram_at(*_pair_lags(a, b)))


def extract_sf(measurements, cfg: PropagationConfig, gs: GeoPoint,
               delta_gain=None):
    """Shadow-fading residuals: measured power minus the two-ray mean.

    Args:
        measurements: list of :class:`Measurement`.
        cfg: propagation configuration used for the deterministic part.
        gs: ground-station location.
        delta_gain: optional calibrated receive-gain correction.

    Returns:
        list of :class:`SfSample` in input order.

    Raises:
        DegenerateLink: if a measurement coincides with the station.
    """
    if not measurements:
        return []
    lat = np.array([m.location.lat_deg for m in measurements])
    lon = np.array([m.location.lon_deg for m in measurements])
    alt = np.array([m.location.alt_m for m in measurements])
    rsrp = np.array([m.rsrp_dbm for m in measurements])
    geom, valid = link_geometry_batch(gs, lat, lon, alt, cfg.wavelength_m)
    if not np.all(valid):
        bad = int(np.nonzero(~valid)[0][0])
        raise DegenerateLink(
            f"measurement seq={measurements[bad].seq} coincides with the station"
        )
    if delta_gain is None:
        rhat = trpl_received_power_db(cfg, geom)
    else:
        rhat = calibrated_received_power_db(cfg, geom, delta_gain)
    z = rsrp - rhat
    return [
        SfSample(m.location, float(zi), m.seq)
        for m, zi in zip(measurements, z)
    ]


def estimate_sigma(sf) -> float:
    """Sample standard deviation of the residuals (mean removed, ddof=1)."""
    s = SampleSet.from_samples(sf)
    if len(s) < 2:
        raise InsufficientData("need at least two samples to estimate sigma")
    return float(np.std(s.z, ddof=1))


@dataclass(frozen=True)
class CorrelationTable:
    """Empirical pair-product correlation binned over (d_h, d_v) lag.

    ``value[i, j]`` is the normalized mean product for pairs whose
    horizontal lag falls in ``[dh_edges[i], dh_edges[i+1])`` and whose
    vertical lag falls in ``[dv_edges[j], dv_edges[j+1])``; NaN where a
    bin collected no pairs.
    """

    dh_edges: np.ndarray
    dv_edges: np.ndarray
    value: np.ndarray
    count: np.ndarray
    sigma: float
    mean_z: float
    n_pairs_total: int
    n_pairs_used: int

    @property
    def dh_centers(self):
        return 0.5 * (self.dh_edges[:-1] + self.dh_edges[1:])

    @property
    def dv_centers(self):
        return 0.5 * (self.dv_edges[:-1] + self.dv_edges[1:])


def _pair_indices(n: int, max_pairs: int):
    """Deterministic subsample of the i<j pair enumeration.

    Returns (i, j) index arrays covering every pair when the total fits
    under ``max_pairs``, otherwise a fixed-stride thinning of the
    row-major pair order.
    """
    total = n * (n - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(n, k=1)
        return i, j, total
    stride = int(np.ceil(total / max_pairs))
    k = np.arange(0, total, stride, dtype=np.int64)
    # first linear index of row i is i*n - i*(i+1)/2
    rows = np.arange(n - 1, dtype=np.int64)
    row_start = rows * n - rows * (rows + 1) // 2
    i = np.searchsorted(row_start, k, side="right") - 1
    j = i + 1 + (k - row_start[i])
    return i, j, total


def empirical_correlation(sf, dh_edges=None, dv_edges=None,
                          max_pairs: int = 2_000_000) -> CorrelationTable:
    """Bin pair products of centered residuals over horizontal/vertical lag.

    Pairs beyond the last bin edge are discarded.  When the pair count
    exceeds ``max_pairs`` a deterministic stride subsample is used, so
    repeated runs agree bit for bit.

    Raises:
        InsufficientData: fewer than two samples, or zero variance.
    """
    s = SampleSet.from_samples(sf)
    if len(s) < 2:
        raise InsufficientData("need at least two samples for a correlation table")
    dh_edges = DEFAULT_DH_EDGES if dh_edges is None else np.asarray(dh_edges, float)
    dv_edges = DEFAULT_DV_EDGES if dv_edges is None else np.asarray(dv_edges, float)
    sigma = float(np.std(s.z, ddof=1))
    if sigma == 0.0:
        raise InsufficientData("residuals have zero variance")
    mean_z = float(np.mean(s.z))
    zc = s.z - mean_z

    i, j, total = _pair_indices(len(s), max_pairs)
    dh = _arc_distance(s.lat[i], s.lon[i], s.lat[j], s.lon[j])
    dv = np.abs(s.alt[i] - s.alt[j])
    zz = zc[i] * zc[j]

    ih = np.searchsorted(dh_edges, dh, side="right") - 1
    iv = np.searchsorted(dv_edges, dv, side="right") - 1
    ok = (
        (ih >= 0) & (ih < len(dh_edges) - 1)
        & (iv >= 0) & (iv < len(dv_edges) - 1)
        & (dh < dh_edges[-1]) & (dv < dv_edges[-1])
    )
    n_dh = len(dh_edges) - 1
    n_dv = len(dv_edges) - 1
    flat = ih[ok] * n_dv + iv[ok]
    sums = np.bincount(flat, weights=zz[ok], minlength=n_dh * n_dv)
    counts = np.bincount(flat, minlength=n_dh * n_dv)
    with np.errstate(invalid="ignore"):
        value = np.where(counts > 0, sums / np.maximum(counts, 1) / sigma**2, np.nan)
    return CorrelationTable(
        dh_edges=dh_edges,
        dv_edges=dv_edges,
        value=value.reshape(n_dh, n_dv),
        count=counts.reshape(n_dh, n_dv).astype(int),
        sigma=sigma,
        mean_z=mean_z,
        n_pairs_total=total,
        n_pairs_used=int(len(i)),
    )


def _model_values(params, dh, dv, fix_a_one):
    if fix_a_one:
        p1, q = params
        a, p2 = 1.0, p1
    else:
        a, p1, p2, q = params
    a = min(max(a, 0.0), 1.0)
    p1 = min(max(p1, 0.0), MAX_RATE_PER_M)
    p2 = min(max(p2, 0.0), MAX_RATE_PER_M)
    q = min(max(q, 0.0), MAX_RATE_PER_M)
    r = np.exp(-q * dv) * (a * np.exp(-p1 * dh) + (1.0 - a) * np.exp(-p2 * dh))
    return r, (a, p1, p2, q)


def fit_correlation_model(table: CorrelationTable, fix_a_one: bool = False,
                          residual_threshold: float = 0.5) -> CorrelationModel:
    """Weighted least-squares fit of the correlation model to a table.

    Bin values are weighted by their pair counts.  A multistart
    Nelder-Mead search covers mixing weights across [0, 1] and decay
    rates across several orders of magnitude, always including a
    nugget-like start at the rate clamp so uncorrelated data resolves
    there instead of diverging.  The returned model is canonicalized to
    p1 >= p2.

    Raises:
        InsufficientData: fewer than 6 non-empty bins.
        FitDiverged: weighted RMS residual above ``residual_threshold``.
    """
    mask = table.count > 0
    if np.count_nonzero(mask) < 6:
        raise InsufficientData(
            f"only {np.count_nonzero(mask)} non-empty bins; need at least 6"
        )
    dh_c, dv_c = np.meshgrid(table.dh_centers, table.dv_centers, indexing="ij")
    dh = dh_c[mask]
    dv = dv_c[mask]
    r_emp = table.value[mask]
    w = table.count[mask].astype(float)
    w = w / w.sum()

    def objective(params):
        r_mod, _ = _model_values(params, dh, dv, fix_a_one)
        return float(np.sum(w * (r_mod - r_emp) ** 2))

    if fix_a_one:
        starts = [
            (MAX_RATE_PER_M, MAX_RATE_PER_M),
            (0.1, 0.1),
            (0.01, 0.05),
            (0.001, 0.01),
        ]
    else:
        starts = [(0.5, MAX_RATE_PER_M, MAX_RATE_PER_M, MAX_RATE_PER_M)]
        for a0 in (0.25, 0.5, 0.75, 1.0):
            for p10, p20 in ((0.1, 0.01), (0.01, 0.001)):
                starts.append((a0, p10, p20, 0.05))

    opts = dict(xatol=1e-11, fatol=1e-15, maxiter=4000, maxfev=8000)
    best = None
    for x0 in starts:
        res = optimize.minimize(objective, x0, method="Nelder-Mead", options=opts)
        # restart once from the located optimum; standard simplex polish
        res = optimize.minimize(objective, res.x, method="Nelder-Mead", options=opts)
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitDiverged("no start converged to a finite objective")

    r_mod, (a, p1, p2, q) = _model_values(best.x, dh, dv, fix_a_one)
    rms = float(np.sqrt(np.sum(w * (r_mod - r_emp) ** 2)))
    if rms > residual_threshold:
        raise FitDiverged(
            f"weighted RMS residual {rms:.3f} exceeds {residual_threshold}"
        )
    if p2 > p1:
        a, p1, p2 = 1.0 - a, p2, p1
    return CorrelationModel(a=a, p1=p1, p2=p2, q=q, sigma_z=table.sigma)


def transformed_model(model: CorrelationModel, sigma_z: float) -> CorrelationModel:
    """Copy of ``model`` with a different marginal standard deviation."""
    return replace(model, sigma_z=sigma_z)
