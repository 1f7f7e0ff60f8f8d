"""Dirichlet fundamental domain and reduction to the quotient surface.

The fundamental domain F is the Dirichlet domain centered at the disk
origin: points at least as close to the origin as to any orbit translate.
Reduction is greedy descent over the side-pairing generators, with the
enumerated test-set ball as a certifying fallback.
"""

from __future__ import annotations

import numpy as np

from . import fuchsian as fu
from . import hypgeom as hg
from .errors import ReductionFailureError

DESCENT_BUDGET = 10_000
DESCENT_EPS = 1e-13     # relative decrease required to count as progress
MEMBERSHIP_TOL = 1e-9


class FundamentalDomain:
    """Dirichlet domain of a surface group, centered at the origin."""

    def __init__(self, surface: fu.SurfaceModel, test_radius: float | None = None):
        self.surface = surface
        if test_radius is None:
            # the bisector of gamma meets F only if displacement(gamma) is at
            # most the domain diameter, so this test set is already complete
            test_radius = surface.domain_diameter + 0.2
        ball = fu.enumerate_ball(surface, test_radius)
        sel = np.nonzero(ball.inside & (ball.disp > 1e-9))[0]
        a, b = hg.normalize_ab(ball.a[sel], ball.b[sel])
        self.test_a = a
        self.test_b = b
        # face set: elements whose bisector cuts the interior of F (bisector
        # distance disp/2 strictly below the circumradius); elements whose
        # bisector only touches a vertex are redundant for membership
        faces = ball.disp[sel] / 2.0 < 0.5 * surface.domain_diameter - 1e-9
        self.face_a = a[faces]
        self.face_b = b[faces]

    # -- membership -------------------------------------------------------

    def contains_z(self, z, tol=MEMBERSHIP_TOL, *, full=False):
        """Vectorized Dirichlet membership: no translate is closer to o.

        dist(gamma z, o) >= dist(z, o) - tol for every face element (or the
        whole test set when full=True; the face set is equivalent away from
        measure-zero vertex ties).
        """
        z = np.atleast_1d(np.asarray(z, complex))
        d0 = hg.dist_z(z, 0j)
        ok = np.ones(len(z), dtype=bool)
        ta = self.test_a if full else self.face_a
        tb = self.test_b if full else self.face_b
        for a, b in zip(ta, tb):
            w = hg.mobius_apply_z(a, b, z)
            ok &= hg.dist_z(w, 0j) >= d0 - tol
        return ok

    def contains(self, p: hg.DiskPoint, tol=MEMBERSHIP_TOL) -> bool:
        return bool(self.contains_z(np.array([p.z]), tol)[0])

    def quotient_dist_z(self, z1, z2):
        """Elementwise quotient distance between points of F.

        Minimum of dist(z1, g z2) over the identity and the test set; exact
        for pairs of points in (the closure of) F, where the minimizing
        translate is always a Dirichlet neighbor.
        """
        z1 = np.atleast_1d(np.asarray(z1, complex))
        z2 = np.atleast_1d(np.asarray(z2, complex))
        best = hg.dist_z(z1, z2)
        for a, b in zip(self.test_a, self.test_b):
            best = np.minimum(best, hg.dist_z(z1, hg.mobius_apply_z(a, b, z2)))
        return best

    # -- reduction --------------------------------------------------------

    def reduce_z(self, z):
        """Reduce an array of points to F; returns (z_red, a_acc, b_acc).

        The accumulated isometry satisfies mobius(a_acc, b_acc, z) = z_red.
        Greedy descent over the generators, then a certifying pass over the
        full test set (applied if any test element still improves).
        """
        z = np.atleast_1d(np.asarray(z, complex))
        acc_a = np.ones(len(z), dtype=complex)
        acc_b = np.zeros(len(z), dtype=complex)
        cur = z.copy()
        ga, gb = self.surface.gen_a, self.surface.gen_b

        for _round in range(DESCENT_BUDGET):
            d0 = hg.dist_z(cur, 0j)
            imgs = hg.mobius_apply_z(ga[None, :], gb[None, :], cur[:, None])
            dists = hg.dist_z(imgs, 0j)
            best = np.argmin(dists, axis=1)
            bestd = dists[np.arange(len(cur)), best]
            move = bestd < d0 * (1.0 - DESCENT_EPS) - 1e-15
            if not move.any():
                # certify against the full test set; fall back if needed
                moved = self._test_set_pass(cur, acc_a, acc_b)
                if not moved:
                    return cur, acc_a, acc_b
                continue
            bl = best[move]
            na, nb = hg.compose_ab(ga[bl], gb[bl], acc_a[move], acc_b[move])
            acc_a[move], acc_b[move] = hg.normalize_ab(na, nb)
            cur[move] = imgs[np.nonzero(move)[0], bl]
        raise ReductionFailureError("descent budget exhausted")

    def _test_set_pass(self, cur, acc_a, acc_b) -> bool:
        d0 = hg.dist_z(cur, 0j)
        moved = False
        for a, b in zip(self.test_a, self.test_b):
            w = hg.mobius_apply_z(a, b, cur)
            better = hg.dist_z(w, 0j) < d0 * (1.0 - DESCENT_EPS) - 1e-15
            if better.any():
                na, nb = hg.compose_ab(a, b, acc_a[better], acc_b[better])
                acc_a[better], acc_b[better] = hg.normalize_ab(na, nb)
                cur[better] = w[better]
                d0 = hg.dist_z(cur, 0j)
                moved = True
        return moved

    def reduce_phase(self, v: hg.PhasePoint):
        """Reduce a phase point; returns (reduced PhasePoint, Isometry g)
        with apply_phase(g, v) equal to the reduced point."""
        zr, a, b = self.reduce_z(np.array([v.base.z]))
        g = hg.Isometry(complex(a[0]), complex(b[0]))
        return hg.apply_phase(g, v), g

    def reduce_phase_z(self, z, theta):
        """Vectorized phase reduction: arrays z, theta -> (z_red, theta_red)."""
        zr, a, b = self.reduce_z(z)
        tr = hg.mobius_dir_z(a, b, np.asarray(z, complex), np.asarray(theta, float))
        return zr, tr
