"""Generate the bundled Europe target set (run once, output committed).

Area-uniform points over a coarse hand-traced outline of Europe
(continent, Scandinavia with the enclosed Baltic gulfs, British Isles),
drawn by rejection sampling with cos-latitude density so the accepted
points are uniform on the sphere.  Weights are implicit (1.0 each).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# (lon, lat) vertices, coarse outlines
CONTINENT = [
    (-9.5, 36.0), (-9.8, 38.6), (-9.3, 43.0), (-1.8, 43.6), (-4.8, 48.4),
    (-1.5, 49.7), (2.5, 51.1), (4.5, 53.3), (8.0, 55.4), (9.8, 57.6),
    (10.9, 56.0), (12.2, 54.3), (14.2, 53.9), (19.5, 54.5), (21.2, 55.3),
    (24.5, 57.0), (24.8, 59.4), (28.2, 59.4), (31.5, 56.0), (33.5, 52.5),
    (35.5, 49.5), (37.5, 47.3), (35.0, 46.2), (30.2, 45.8), (29.7, 45.2),
    (28.1, 43.3), (28.0, 41.5), (26.2, 40.1), (24.3, 38.2), (23.2, 36.4),
    (21.6, 37.0), (21.3, 38.4), (19.9, 40.0), (18.6, 42.1), (16.1, 43.5),
    (13.8, 44.9), (12.4, 44.2), (14.1, 42.6), (15.8, 41.9), (18.4, 40.3),
    (16.7, 38.9), (15.7, 37.9), (15.9, 38.6), (14.9, 40.2), (13.8, 41.2),
    (11.1, 42.4), (8.9, 44.4), (6.6, 43.2), (3.1, 42.5), (0.2, 39.6),
    (-0.7, 37.6), (-2.1, 36.7), (-5.4, 36.0),
]
SCANDINAVIA = [
    (5.2, 58.5), (4.8, 62.0), (10.0, 65.0), (14.0, 68.0), (20.0, 70.2),
    (26.0, 71.0), (29.5, 69.8), (30.5, 67.0), (30.0, 64.0), (28.5, 61.0),
    (27.5, 60.3), (24.0, 60.1), (22.0, 59.6), (19.0, 58.5), (16.5, 56.3),
    (12.8, 55.4), (11.2, 57.5), (9.5, 58.7), (7.0, 58.0),
]
BRITISH_ISLES = [
    (-5.7, 50.0), (1.3, 51.2), (1.7, 52.9), (-0.5, 54.5), (-1.8, 55.6),
    (-2.0, 57.6), (-3.1, 58.6), (-5.0, 58.6), (-7.6, 57.6), (-6.4, 55.5),
    (-8.3, 55.3), (-10.0, 54.3), (-10.5, 51.8), (-8.5, 51.4), (-6.2, 52.1),
    (-5.3, 51.7), (-5.3, 50.3),
]
POLYGONS = [CONTINENT, SCANDINAVIA, BRITISH_ISLES]

LAT_MIN, LAT_MAX = 34.0, 72.0
LON_MIN, LON_MAX = -11.0, 41.0


def in_polygon(lon: float, lat: float, poly) -> bool:
    inside = False
    j = len(poly) - 1
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x0, y0 = poly[j]
        if (y1 > lat) != (y0 > lat):
            x_cross = (x0 - x1) * (lat - y1) / (y0 - y1) + x1
            if lon < x_cross:
                inside = not inside
        j = i
    return inside


def main(n: int = 500, seed: int = 20240101) -> None:
    rng = np.random.default_rng(seed)
    s_lo, s_hi = np.sin(np.radians(LAT_MIN)), np.sin(np.radians(LAT_MAX))
    rows = []
    while len(rows) < n:
        lon = rng.uniform(LON_MIN, LON_MAX)
        lat = np.degrees(np.arcsin(rng.uniform(s_lo, s_hi)))
        if any(in_polygon(lon, lat, p) for p in POLYGONS):
            rows.append((lat, lon))
    out = Path(__file__).resolve().parents[1] / "src/orbitgrad/data/europe_500.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write("lat_deg,lon_deg\n")
        for lat, lon in rows:
            fh.write(f"{lat:.4f},{lon:.4f}\n")
    print(f"wrote {len(rows)} targets to {out}")


if __name__ == "__main__":
    main()
