"""Walk through the deterministic half of the pipeline.

A ground station talks to a UAV over a direct ray plus one ground
reflection.  This script prints how the two-ray level oscillates around
free space close in, converges onto it far out, and how antenna
patterns move the received power.
"""

import dataclasses

import numpy as np

import remsense as rs

GS = rs.GeoPoint(35.72, -78.70, 10.0)
PROP = rs.PropagationConfig(carrier_hz=3.32e9, tx_power_dbm=23.0)
M_PER_DEG_LON = 111132.954 * np.cos(np.radians(GS.lat_deg))


def east_of(dx_m, alt_m):
    return rs.GeoPoint(GS.lat_deg, GS.lon_deg + dx_m / M_PER_DEG_LON, alt_m)


print("Two-ray level vs free space, UAV at 60 m, flying east")
print(f"{'d_h (m)':>8} {'two-ray (dBm)':>14} {'free space':>11} {'ripple':>8}")
free = dataclasses.replace(PROP, ground_rel_permittivity=1.0)
for dx in (30, 60, 120, 250, 500, 1000, 2000, 4000):
    geom = rs.link_geometry(GS, east_of(dx, 60.0), PROP.wavelength_m)
    two_ray = rs.trpl_received_power_db(PROP, geom)
    fspl = rs.trpl_received_power_db(free, geom)
    print(f"{dx:>8} {two_ray:>14.2f} {fspl:>11.2f} {two_ray - fspl:>+8.2f}")

print()
print("Same link, but the UAV carries a dipole instead of an isotrope")
dipole = rs.dipole_pattern()
with_dipole = dataclasses.replace(PROP, uav_pattern=dipole)
for dx in (120, 1000):
    geom = rs.link_geometry(GS, east_of(dx, 60.0), PROP.wavelength_m)
    iso = rs.trpl_received_power_db(PROP, geom)
    dip = rs.trpl_received_power_db(with_dipole, geom)
    print(f"  d_h={dx:>5} m: isotropic {iso:7.2f} dBm, "
          f"dipole {dip:7.2f} dBm (elevation {geom.theta_r:.1f} deg)")

print()
print("Receive-direction angles the calibration stage works with")
geom = rs.link_geometry(GS, east_of(300.0, 90.0), PROP.wavelength_m)
print(f"  station->UAV bearing phi_t  = {geom.phi_t:8.3f} deg")
print(f"  UAV->station bearing phi_r  = {geom.phi_r:8.3f} deg")
print(f"  elevation theta_r           = {geom.theta_r:8.3f} deg")
print(f"  reflected-ray arrival       = {geom.theta_r1:8.3f} deg")
