import numpy as np
import pytest

import remsense as rs

GS = rs.GeoPoint(35.72, -78.70, 10.0)
PROP = rs.PropagationConfig(carrier_hz=3.32e9, tx_power_dbm=23.0)
CORR = rs.CorrelationModel(a=0.7, p1=0.05, p2=0.005, q=0.1, sigma_z=3.0)


@pytest.fixture(scope="session")
def gs():
    return GS


@pytest.fixture(scope="session")
def prop():
    return PROP


@pytest.fixture(scope="session")
def corr():
    return CORR


def east_of(origin, dx_m, alt_m):
    """Point ``dx_m`` meters east of ``origin`` at ``alt_m``."""
    lat, lon = rs.geo.from_local_xy(np.array([dx_m]), np.array([0.0]), origin)
    return rs.GeoPoint(float(lat[0]), float(lon[0]), alt_m)


def offset_point(origin, dx_m, dy_m, alt_m):
    lat, lon = rs.geo.from_local_xy(np.array([dx_m]), np.array([dy_m]), origin)
    return rs.GeoPoint(float(lat[0]), float(lon[0]), alt_m)


@pytest.fixture(scope="session")
def gaussian_campaigns():
    """A train/test campaign pair on one correlated Gaussian scene family."""
    scene_tr = rs.SceneSpec(gs=GS, cfg=PROP, corr=CORR, seed=101)
    scene_te = rs.SceneSpec(gs=GS, cfg=PROP, corr=CORR, seed=102)
    base = rs.GeoPoint(35.721, -78.702, 50.0)
    traj_tr = rs.lawnmower_trajectory(base, 500, 400, n_rows=10, alt_m=50.0,
                                      sample_spacing_m=14.0)
    traj_te = rs.zigzag_trajectory(base, 500, 400, n_legs=11, alt_m=70.0,
                                   sample_spacing_m=14.0)
    train, _ = rs.generate_campaign(scene_tr, traj_tr)
    test, truth = rs.generate_campaign(scene_te, traj_te)
    return train, test, truth
