"""Physical constants shared across the toolkit (km / s / rad)."""

MU_EARTH = 398600.4418  # [km^3/s^2] gravitational parameter
R_EARTH = 6378.137  # [km] equatorial radius
OMEGA_EARTH = 7.2921158553e-5  # [rad/s] rotation rate

SEC_PER_MIN = 60.0
MIN_PER_DAY = 1440.0
