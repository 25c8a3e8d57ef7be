"""Link geometry between a ground station and an aerial receiver.

Horizontal separations follow the spherical great-circle formula with a
mean earth radius of 6,371 km.  The ground-reflection geometry uses a
flat-earth image construction on the local tangent plane, which is the
usual approximation for the short, low-altitude links flown by survey
UAVs.

Angle conventions used throughout the package:

* azimuths are degrees clockwise from true north;
* ``theta_t`` is the elevation of the direct ray at the ground station,
  positive above the local horizontal;
* ``theta_r`` is the angle of the direct ray at the UAV measured toward
  the ground, positive downward (the UAV antenna faces down, so a link
  to a station straight below reads +90);
* ``theta_t1`` / ``theta_r1`` are the same two conventions applied to
  the ground-reflected ray, so ``theta_t1`` is negative (the ray leaves
  the station downward) and ``theta_r1`` is positive.

All functions accept scalars or equal-length numpy arrays for the
coordinate arguments and broadcast elementwise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLink, RangeError

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class GeoPoint:
    """A location given as geodetic coordinates.

    Attributes:
        lat_deg: latitude in degrees, in [-90, 90].
        lon_deg: longitude in degrees, in [-180, 180].
        alt_m: height in metres above the common ground datum.
    """

    lat_deg: float
    lon_deg: float
    alt_m: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise RangeError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not (-180.0 <= self.lon_deg <= 180.0):
            raise RangeError(f"longitude {self.lon_deg} outside [-180, 180]")
        if not np.isfinite(self.alt_m):
            raise RangeError(f"altitude {self.alt_m} is not finite")


@dataclass(frozen=True)
class LinkGeometry:
    """Distances and antenna-frame angles for one station-to-UAV link.

    Angles are degrees, distances metres.  ``delta_tau`` is the excess
    phase of the reflected ray relative to the direct one, in radians.
    Fields hold floats for a single link or arrays for a batch.
    """

    d_h: float
    d_v: float
    d_3d: float
    phi_t: float
    theta_t: float
    phi_r: float
    theta_r: float
    phi_t1: float
    theta_t1: float
    phi_r1: float
    theta_r1: float
    theta_ref: float
    d1: float
    d2: float
    delta_tau: float


def horizontal_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between the ground projections of two points."""
    return float(
        _arc_distance(a.lat_deg, a.lon_deg, b.lat_deg, b.lon_deg)
    )


def vertical_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Absolute altitude difference in metres."""
    return abs(a.alt_m - b.alt_m)


def _arc_distance(lat1, lon1, lat2, lon2):
    """Spherical arc length, vectorized, degrees in / metres out.

    Haversine form of the great-circle arc: algebraically the same
    distance as the spherical law of cosines, but it keeps full float
    precision at short range (the arccos form loses eight digits below a
    kilometre and cannot return exactly zero for coincident points,
    which downstream exact-interpolation guarantees rely on).
    """
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dphi = np.radians(np.asarray(lat2, dtype=float)
                      - np.asarray(lat1, dtype=float))
    dlon = np.radians(np.asarray(lon2, dtype=float)
                      - np.asarray(lon1, dtype=float))
    h = (np.sin(dphi / 2.0) ** 2
         + np.cos(p1) * np.cos(p2) * np.sin(dlon / 2.0) ** 2)
    # rounding can push the haversine a hair outside [0, 1]
    h = np.clip(h, 0.0, 1.0)
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))


def _bearing_deg(lat1, lon1, lat2, lon2):
    """Initial great-circle bearing from point 1 to point 2.

    Degrees clockwise from north in [0, 360).  Zero when the points
    share a ground projection.
    """
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dlon = np.radians(np.asarray(lon2, dtype=float) - np.asarray(lon1, dtype=float))
    y = np.sin(dlon) * np.cos(p2)
    x = np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dlon)
    return np.degrees(np.arctan2(y, x)) % 360.0


def link_geometry(gs: GeoPoint, uav: GeoPoint, wavelength_m: float) -> LinkGeometry:
    """Full direct-plus-reflected geometry for one link.

    Args:
        gs: ground-station antenna location (``alt_m`` >= 0).
        uav: receiver location (``alt_m`` >= 0).
        wavelength_m: carrier wavelength in metres.

    Returns:
        A populated :class:`LinkGeometry`.

    Raises:
        DegenerateLink: if the two points coincide.
        RangeError: if an antenna height is negative or the wavelength
            is not positive.
    """
    if gs.alt_m < 0 or uav.alt_m < 0:
        raise RangeError("antenna heights must be >= 0 for reflection geometry")
    if wavelength_m <= 0:
        raise RangeError("wavelength must be positive")
    fields = _link_fields(
        gs.lat_deg, gs.lon_deg, gs.alt_m,
        uav.lat_deg, uav.lon_deg, uav.alt_m,
        wavelength_m,
    )
    geom = LinkGeometry(*(float(v) for v in fields))
    if geom.d_3d == 0.0:
        raise DegenerateLink("ground station and receiver coincide")
    return geom


def link_geometry_batch(gs: GeoPoint, lat, lon, alt, wavelength_m: float):
    """Vectorized :func:`link_geometry` against a fixed ground station.

    Args:
        gs: ground-station location.
        lat, lon, alt: equal-length arrays of receiver coordinates.
        wavelength_m: carrier wavelength in metres.

    Returns:
        ``(geom, valid)`` where ``geom`` is a :class:`LinkGeometry` of
        arrays and ``valid`` is a boolean mask, False where a receiver
        coincides with the station (those entries hold NaN angles).
    """
    if gs.alt_m < 0:
        raise RangeError("antenna heights must be >= 0 for reflection geometry")
    if wavelength_m <= 0:
        raise RangeError("wavelength must be positive")
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    alt = np.asarray(alt, dtype=float)
    if np.any(alt < 0):
        raise RangeError("antenna heights must be >= 0 for reflection geometry")
    fields = _link_fields(
        gs.lat_deg, gs.lon_deg, gs.alt_m, lat, lon, alt, wavelength_m
    )
    geom = LinkGeometry(*fields)
    valid = np.asarray(geom.d_3d) > 0.0
    return geom, valid


def _link_fields(glat, glon, galt, ulat, ulon, ualt, wavelength_m):
    d_h = _arc_distance(glat, glon, ulat, ulon)
    d_v = np.abs(np.asarray(ualt, dtype=float) - galt)
    d_3d = np.hypot(d_h, d_v)

    phi_t = _bearing_deg(glat, glon, ulat, ulon)
    phi_r = _bearing_deg(ulat, ulon, glat, glon)

    dz = np.asarray(ualt, dtype=float) - galt
    # direct ray: elevation at the station, depression at the receiver;
    # the flat-earth tangent plane makes the two magnitudes equal
    theta_t = np.degrees(np.arctan2(dz, d_h))
    theta_r = theta_t

    # image construction: mirror the station below ground, the reflected
    # path length is the straight line to the image
    h_sum = galt + np.asarray(ualt, dtype=float)
    path_ref = np.hypot(d_h, h_sum)
    with np.errstate(invalid="ignore"):
        theta_ref = np.degrees(np.arctan2(h_sum, d_h))
    # split the reflected path at the specular point
    x_s = np.divide(
        d_h * galt, h_sum,
        out=np.zeros_like(d_h * 1.0),
        where=h_sum > 0,
    )
    d1 = np.hypot(x_s, galt)
    d2 = np.hypot(d_h - x_s, ualt)
    delta_tau = 2.0 * np.pi * (path_ref - d_3d) / wavelength_m

    theta_t1 = -theta_ref
    theta_r1 = theta_ref
    phi_t1 = phi_t
    phi_r1 = phi_r
    return (
        d_h, d_v, d_3d,
        phi_t, theta_t, phi_r, theta_r,
        phi_t1, theta_t1, phi_r1, theta_r1,
        theta_ref, d1, d2, delta_tau,
    )


def to_local_xy(lat, lon, origin: GeoPoint):
    """Project coordinates to a local tangent plane at ``origin``.

    Returns ``(x_east, y_north)`` in metres.  Good to well under a part
    in 1e4 for the sub-kilometre extents this package works over.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    scale = np.cos(np.radians(origin.lat_deg))
    x = np.radians(lon - origin.lon_deg) * EARTH_RADIUS_M * scale
    y = np.radians(lat - origin.lat_deg) * EARTH_RADIUS_M
    return x, y


def from_local_xy(x, y, origin: GeoPoint):
    """Inverse of :func:`to_local_xy`; returns ``(lat_deg, lon_deg)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = np.cos(np.radians(origin.lat_deg))
    lat = origin.lat_deg + np.degrees(y / EARTH_RADIUS_M)
    lon = origin.lon_deg + np.degrees(x / (EARTH_RADIUS_M * scale))
    return lat, lon
