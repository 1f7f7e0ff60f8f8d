"""Rank dichotomy on conformal plane metrics via Jacobi/Riccati dynamics.

A geodesic has higher rank iff a perpendicular parallel Jacobi field exists
along it, which on a surface means the curvature vanishes along the orbit.
The lab classifies this two independent ways - curvature along the orbit,
and the gap between the forward and backward Riccati limits - and the two
must agree on every sampled geodesic.

Run: python3 demos/demo_rank_dichotomy.py   (about half a minute)
"""

import math

from geodlab import jacobi as ja


def main():
    print("Riccati limits on the constant-curvature disk pullback "
          "(K = -1, so u_± = ±1):")
    rc = ja.riccati_subspaces(ja.load_metric("constant_m1"),
                              ja.GeodesicState(0.1, 0.05, 0.4))
    print(f"  u_unstable = {rc.u_unstable:+.8f}   "
          f"u_stable = {rc.u_stable:+.8f}   gap = {rc.gap:.8f}\n")

    print("flat strip: a vertical geodesic stays in the flat core "
          "(rank >= 2), a crossing one meets curvature (rank one):")
    m = ja.load_metric("flat_strip")
    for name, theta in (("vertical", math.pi / 2), ("crossing", 0.0)):
        rk = ja.rank_classify(m, ja.GeodesicState(0.0, 0.0, theta))
        rc = ja.riccati_subspaces(m, ja.GeodesicState(0.0, 0.0, theta))
        print(f"  {name:9s}: sup|K| = {rk.sup_abs_K:.2e}  ->  {rk.rank:9s}"
              f"   riccati gap = {rc.gap:.2e}")
    print()

    print("classifier agreement, 100 random geodesics per preset:")
    for preset in sorted(ja.PRESETS):
        res = ja.rank_suite(preset, n_geodesics=100, seed=0)
        counts = {}
        for _, rk, _, _ in res.reports:
            counts[rk.rank] = counts.get(rk.rank, 0) + 1
        print(f"  {preset:18s}: {counts}   disagreements: "
              f"{res.disagreements}")


if __name__ == "__main__":
    main()
