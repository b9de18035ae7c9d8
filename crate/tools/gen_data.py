#!/usr/bin/env python3
"""Generate the bundled data files: synthetic Walker constellations as
two-line element sets, a gateway site list, and a synthetic population
intensity grid. Deterministic; rerun to regenerate data/ from scratch."""

import math
import os

MU = 398600.4418  # km^3/s^2
RE = 6371.0

OUT = os.path.join(os.path.dirname(__file__), "..", "data")


def checksum(line68: str) -> int:
    s = 0
    for c in line68:
        if c.isdigit():
            s += int(c)
        elif c == "-":
            s += 1
    return s % 10


def mean_motion_rev_day(alt_km: float) -> float:
    a = RE + alt_km
    n = math.sqrt(MU / a**3)  # rad/s
    return n * 86400.0 / (2.0 * math.pi)


def tle_pair(satnum: int, incl_deg: float, raan_deg: float, ma_deg: float,
             mm_rev_day: float) -> str:
    l1 = (f"1 {satnum:05d}U 25001A   25001.00000000  .00000000"
          f"  00000-0  00000-0 0    1")
    assert len(l1) == 68, len(l1)
    l1 += str(checksum(l1))
    l2 = (f"2 {satnum:05d} {incl_deg:8.4f} {raan_deg:8.4f} 0001000"
          f"   0.0000 {ma_deg:8.4f} {mm_rev_day:11.8f}    1")
    assert len(l2) == 68, len(l2)
    l2 += str(checksum(l2))
    return l1 + "\n" + l2 + "\n"


def walker(path: str, name: str, incl_deg: float, alt_km: float,
           planes: int, per_plane: int, sat0: int, phase_f: int = 1):
    mm = mean_motion_rev_day(alt_km)
    lines = []
    satnum = sat0
    for p in range(planes):
        raan = 360.0 * p / planes
        for s in range(per_plane):
            ma = (360.0 * s / per_plane +
                  360.0 * phase_f * p / (planes * per_plane)) % 360.0
            lines.append(f"{name}-{p+1}{chr(ord('A')+s)}\n")
            lines.append(tle_pair(satnum, incl_deg, raan, ma, mm))
            satnum += 1
    with open(path, "w") as f:
        f.writelines(lines)


def gateways(path: str):
    rows = [
        (0, "Tokyo", 35.68, 139.69, "asia"),
        (1, "Singapore", 1.35, 103.82, "asia"),
        (2, "Seoul", 37.57, 126.98, "asia"),
        (3, "Mumbai", 19.08, 72.88, "asia"),
        (4, "Dublin", 53.35, -6.26, "europe"),
        (5, "Frankfurt", 50.11, 8.68, "europe"),
        (6, "Madrid", 40.42, -3.70, "europe"),
        (7, "Stockholm", 59.33, 18.07, "europe"),
        (8, "Seattle", 47.61, -122.33, "north-america"),
        (9, "Dallas", 32.78, -96.80, "north-america"),
        (10, "Ashburn", 39.04, -77.49, "north-america"),
        (11, "Montreal", 45.50, -73.57, "north-america"),
    ]
    with open(path, "w") as f:
        f.write("id,name,lat_deg,lon_deg,region\n")
        for r in rows:
            f.write("%d,%s,%.2f,%.2f,%s\n" % r)


def population(path: str, n_lat=90, n_lon=180):
    """Sum of Gaussian blobs roughly tracking major population regions."""
    blobs = [  # (lat, lon, weight, sigma_deg)
        (32.0, 115.0, 10.0, 12.0),   # east Asia
        (23.0, 80.0, 9.0, 10.0),     # south Asia
        (50.0, 10.0, 5.0, 12.0),     # Europe
        (40.0, -95.0, 5.0, 14.0),    # North America
        (-15.0, -50.0, 3.0, 12.0),   # South America
        (8.0, 10.0, 3.5, 14.0),      # Africa
        (3.0, 105.0, 4.0, 8.0),      # southeast Asia
        (36.0, 138.0, 3.0, 5.0),     # Japan
        (-30.0, 145.0, 1.0, 10.0),   # Australia
    ]
    lat_step = 180.0 / n_lat
    lon_step = 360.0 / n_lon
    vals = []
    for i in range(n_lat):
        lat = -90.0 + (i + 0.5) * lat_step
        for j in range(n_lon):
            lon = -180.0 + (j + 0.5) * lon_step
            v = 0.0
            for blat, blon, w, sig in blobs:
                dlon = (lon - blon + 180.0) % 360.0 - 180.0
                d2 = (lat - blat) ** 2 + dlon ** 2
                v += w * math.exp(-d2 / (2.0 * sig * sig))
            vals.append(v)
    with open(path, "w") as f:
        f.write(f"{n_lat} {n_lon} -90 90 -180 180\n")
        for i in range(n_lat):
            row = vals[i * n_lon:(i + 1) * n_lon]
            f.write(" ".join("%.6f" % v for v in row) + "\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    walker(os.path.join(OUT, "walker_53deg_550km.tle"),
           "W53", 53.0, 550.0, planes=8, per_plane=5, sat0=10001)
    walker(os.path.join(OUT, "polar_86deg_780km.tle"),
           "P86", 86.4, 780.0, planes=6, per_plane=11, sat0=20001)
    walker(os.path.join(OUT, "polar_88deg_1200km.tle"),
           "P88", 87.9, 1200.0, planes=12, per_plane=4, sat0=30001)
    gateways(os.path.join(OUT, "gateways.csv"))
    population(os.path.join(OUT, "population.grid"))
    print("wrote data files to", os.path.abspath(OUT))


if __name__ == "__main__":
    main()
