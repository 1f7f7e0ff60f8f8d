"""Knieper's measure of maximal entropy and its conditional densities.

The measure of a phase box is computed from the boundary-pair integral: pairs
of boundary atoms are drawn from the Patterson–Sullivan proxy density, the
connecting geodesic is traced through the fundamental-domain window, and the
arclength inside the box is accumulated with the e^{-h(b+b)} weight.  In
constant curvature the result must agree with normalized Liouville measure,
which doubles as the independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import density as de
from . import fuchsian as fu
from . import hypgeom as hg
from .errors import DegenerateMeasureError, InvalidConfigurationError
from .quotient import FundamentalDomain

TWO_PI = 2.0 * math.pi
PAIR_EXCLUSION = 1e-4      # minimal angular separation of boundary pairs
TRACE_STEP = 0.01          # arclength step for geodesic tracing
ASYMPTOTIC_TOL = 1e-6      # busemann tolerance for holonomy configurations


@dataclass(frozen=True)
class PhaseBox:
    """Product box in the fundamental-domain chart: metric ball x angle window."""

    center: hg.PhasePoint
    position_radius: float
    angle_halfwidth: float

    def __post_init__(self):
        if self.position_radius <= 0:
            raise InvalidConfigurationError("position_radius must be positive")
        if not 0 < self.angle_halfwidth <= math.pi:
            raise InvalidConfigurationError("angle_halfwidth must be in (0, pi]")

    def contains_chart(self, z, theta):
        """Membership of chart coordinates (no reduction applied)."""
        near = hg.dist_z(z, self.center.base.z) < self.position_radius
        if self.angle_halfwidth >= math.pi:   # full circle
            return near
        ang = hg.angle_gap(theta, self.center.dir) < self.angle_halfwidth
        return near & ang

    def contains(self, v: hg.PhasePoint, domain: FundamentalDomain) -> bool:
        """Membership after reduction to the fundamental domain."""
        w, _ = domain.reduce_phase(v)
        return bool(self.contains_chart(np.array([w.base.z]),
                                        np.array([w.dir]))[0])


@dataclass
class MeasureEstimate:
    value: float
    std_error: float
    samples: int
    discarded: int = 0
    meta: dict = field(default_factory=dict)


def random_box(domain: FundamentalDomain, rng, *, position_radius=0.35,
               angle_halfwidth=0.5, margin=0.05) -> PhaseBox:
    """Random box whose position ball lies inside the fundamental domain."""
    inradius = 0.5 * domain.surface.generator(0).displacement()
    max_center = inradius - position_radius - margin
    if max_center <= 0:
        raise InvalidConfigurationError("box too large for the domain")
    while True:
        z = (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)) * math.tanh(max_center / 2)
        if hg.dist_z(z, 0j) <= max_center and domain.contains_z(np.array([z]))[0]:
            break
    return PhaseBox(hg.PhasePoint(hg.DiskPoint(complex(z)), rng.uniform(0, TWO_PI)),
                    position_radius, angle_halfwidth)


# ---------------------------------------------------------------------------
# Liouville oracle

ENCLOSING_EUCLID_RADIUS_PAD = 0.005


def _euclid_enclosing_radius(domain: FundamentalDomain) -> float:
    circum = 0.5 * domain.surface.domain_diameter
    return math.tanh(0.5 * circum) + ENCLOSING_EUCLID_RADIUS_PAD


def domain_area(domain: FundamentalDomain, n_samples=400_000, seed=0) -> MeasureEstimate:
    """Hyperbolic area of F by rejection sampling (Gauss-Bonnet oracle 4 pi)."""
    rng = np.random.default_rng(seed)
    r0 = _euclid_enclosing_radius(domain)
    z = _euclid_uniform(rng, n_samples, r0)
    w = 4.0 / (1.0 - np.abs(z) ** 2) ** 2
    x = np.where(domain.contains_z(z), w, 0.0)
    euclid_area = math.pi * r0 * r0
    mean, se = x.mean(), x.std(ddof=1) / math.sqrt(n_samples)
    return MeasureEstimate(mean * euclid_area, se * euclid_area, n_samples)


def _euclid_uniform(rng, n, r0):
    return (np.sqrt(rng.uniform(0, 1, n)) * r0
            * np.exp(1j * rng.uniform(0, TWO_PI, n)))


def liouville_measure(domain: FundamentalDomain, box: PhaseBox,
                      n_samples=400_000, seed=0) -> MeasureEstimate:
    """Normalized Liouville measure of a box: area ratio times angle fraction."""
    rng = np.random.default_rng(seed)
    r0 = _euclid_enclosing_radius(domain)
    z = _euclid_uniform(rng, n_samples, r0)
    w = 4.0 / (1.0 - np.abs(z) ** 2) ** 2
    in_f = domain.contains_z(z)
    in_ball = in_f & (hg.dist_z(z, box.center.base.z) < box.position_radius)
    x = np.where(in_ball, w, 0.0)
    y = np.where(in_f, w, 0.0)
    ratio = x.mean() / y.mean()
    # delta-method standard error for the ratio of correlated means
    n = n_samples
    vx = x.var(ddof=1)
    vy = y.var(ddof=1)
    cxy = np.cov(x, y, ddof=1)[0, 1]
    var_r = (vx - 2 * ratio * cxy + ratio * ratio * vy) / (n * y.mean() ** 2)
    angle_frac = box.angle_halfwidth / math.pi
    return MeasureEstimate(ratio * angle_frac,
                           math.sqrt(max(var_r, 0.0)) * angle_frac, n)


# ---------------------------------------------------------------------------
# boundary-pair geodesics

def _pair_geodesics(xi, eta):
    """Closest-approach parameters of geodesics with endpoints (eta -> xi).

    Returns (z_c, theta_c, d_c): closest point to the origin, direction there
    (toward xi), and its hyperbolic distance from the origin.
    """
    m = xi + eta
    deg = np.abs(m) < 1e-12
    delta = np.where(deg, np.angle(xi) - 0.5 * math.pi, np.angle(m))
    phi = np.angle(xi * np.exp(-1j * delta))          # signed half-gap
    r_c = np.tan(0.25 * math.pi - 0.5 * np.abs(phi))
    z_c = r_c * np.exp(1j * delta)
    theta_c = delta + np.sign(phi) * 0.5 * math.pi
    d_c = 2.0 * np.arctanh(np.minimum(r_c, 1.0 - 1e-15))
    return z_c, theta_c, d_c


def _trace_weighted_length(surface, domain, box, xi, eta, weights,
                           flow_t: float = 0.0):
    """Per-pair weight * len(box-lift intersect geodesic), as an array.

    flow_t != 0 measures the g^{flow_t}-image of the box instead: a phase
    point w(s) counts when its base lies in F and the flowed-back point
    w(s - flow_t) reduces into the box chart.  The image box is spread over
    many domain translates, so this path windows on the F-crossing and
    reduces every candidate, which costs about as much as the calibration.

    The lift of the box lives inside the fundamental domain, so only the
    segment of each geodesic crossing the box's position ball (or, for the
    full-space calibration, the circumscribed disk of F) can contribute;
    that window is computed in closed form and traced at TRACE_STEP with
    midpoint membership tests.
    """
    z_c, theta_c, d_c = _pair_geodesics(xi, eta)
    out = np.zeros(len(xi))
    ca0, cb0 = hg.carrier_ab(z_c, theta_c)
    if box is None or flow_t != 0.0:
        # window: the (convex) crossing of the circumscribed disk of F
        r_limit = 0.5 * surface.domain_diameter + 1e-6
        hit = d_c < r_limit
        if not hit.any():
            return out
        idx = np.nonzero(hit)[0]
        half = np.arccosh(np.cosh(r_limit) / np.cosh(d_c[idx]))
        center_s = np.zeros(len(idx))
    else:
        # window: the crossing of the box's position ball
        s_foot, d_foot = hg.geodesic_foot_z(ca0, cb0,
                                            np.full(len(xi), box.center.base.z))
        hit = d_foot < box.position_radius
        if not hit.any():
            return out
        idx = np.nonzero(hit)[0]
        half = np.arccosh(np.cosh(box.position_radius) / np.cosh(d_foot[idx])) + 1e-9
        center_s = s_foot[idx]
    n_steps = np.maximum((2.0 * half / TRACE_STEP).astype(int), 1)
    ca_all, cb_all = ca0[idx], cb0[idx]

    # process pair blocks under a fixed midpoint budget to bound memory
    budget = 2_000_000
    lo = 0
    cum = np.cumsum(n_steps)
    while lo < len(idx):
        hi = int(np.searchsorted(cum, (cum[lo - 1] if lo else 0) + budget)) + 1
        hi = min(max(hi, lo + 1), len(idx))
        ns = n_steps[lo:hi]
        total = int(ns.sum())
        pair_of = np.repeat(np.arange(hi - lo), ns)
        starts = np.concatenate([[0], np.cumsum(ns)[:-1]])
        k = np.arange(total) - np.repeat(starts, ns)
        s = (np.repeat(center_s[lo:hi] - half[lo:hi], ns)
             + (k + 0.5) * TRACE_STEP)

        ca = np.repeat(ca_all[lo:hi], ns)
        cb = np.repeat(cb_all[lo:hi], ns)
        p0 = np.tanh(0.5 * s).astype(complex)
        z = hg.mobius_apply_z(ca, cb, p0)

        if box is None:
            member = domain.contains_z(z)
        elif flow_t != 0.0:
            member = domain.contains_z(z)
            cand = np.nonzero(member)[0]
            if len(cand):
                pb = np.tanh(0.5 * (s[cand] - flow_t)).astype(complex)
                zb = hg.mobius_apply_z(ca[cand], cb[cand], pb)
                tb = hg.mobius_dir_z(ca[cand], cb[cand], pb, 0.0)
                zr, tr = domain.reduce_phase_z(zb, np.asarray(tb, float))
                member[cand[~box.contains_chart(zr, tr)]] = False
        else:
            theta = hg.mobius_dir_z(ca, cb, p0, 0.0)
            member = box.contains_chart(z, theta)
            cand = np.nonzero(member)[0]
            if len(cand):
                sub = domain.contains_z(z[cand])
                member[cand[~sub]] = False
        contrib = np.where(member, TRACE_STEP, 0.0)
        per_pair = np.bincount(pair_of, weights=contrib, minlength=hi - lo)
        out[idx[lo:hi]] = per_pair * weights[idx[lo:hi]]
        lo = hi
    return out


def _pair_weights(p, xi, eta, h):
    """Definition-4.1 weights e^{-h (b(p,q,xi) + b(p,q,eta))}.

    q is the point of the (eta, xi)-geodesic nearest to p; the integrand is
    independent of the choice of q along the geodesic.
    """
    z_c, theta_c, _ = _pair_geodesics(xi, eta)
    ca, cb = hg.carrier_ab(z_c, theta_c)
    s_foot, _ = hg.geodesic_foot_z(ca, cb, np.full(xi.shape, p.z))
    q = hg.mobius_apply_z(ca, cb, np.tanh(0.5 * s_foot).astype(complex))
    pz = np.full(xi.shape, p.z)
    return np.exp(-h * (hg.busemann_z(pz, q, xi) + hg.busemann_z(pz, q, eta)))


def _sample_pairs(density, rng, n):
    """Draw atom index pairs proportional to weights, excluding near-diagonal
    pairs by resampling; returns (xi, eta, n_discarded)."""
    probs = density.weights / density.total_mass
    xi = np.empty(n, dtype=complex)
    eta = np.empty(n, dtype=complex)
    filled = 0
    discarded = 0
    while filled < n:
        todo = n - filled
        i = rng.choice(len(probs), size=todo, p=probs)
        j = rng.choice(len(probs), size=todo, p=probs)
        u, v = density.atom_u[i], density.atom_u[j]
        ok = np.abs(np.angle(u / v)) >= PAIR_EXCLUSION
        k = int(ok.sum())
        xi[filled:filled + k] = u[ok]
        eta[filled:filled + k] = v[ok]
        filled += k
        discarded += todo - k
    return xi, eta, discarded


def knieper_normalization(surface: fu.SurfaceModel, domain: FundamentalDomain,
                          density: de.BoundaryMeasure, n_samples=200_000,
                          seed=0) -> float:
    """Full-space scale: expected weighted length in F x S^1, cached."""
    cache = getattr(density, "_knieper_norm", None)
    if cache is not None and cache[0] == (n_samples, seed):
        return cache[1]
    rng = np.random.default_rng(seed)
    h = surface.entropy_h
    xi, eta, _ = _sample_pairs(density, rng, n_samples)
    w = _pair_weights(density.basepoint, xi, eta, h)
    vals = _trace_weighted_length(surface, domain, None, xi, eta, w)
    z = float(vals.mean())
    if z <= 0:
        raise DegenerateMeasureError("normalization estimate vanished")
    z_se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    density._knieper_norm = ((n_samples, seed), (z, z_se))
    return z, z_se


def knieper_measure(surface: fu.SurfaceModel, domain: FundamentalDomain,
                    box: PhaseBox, density: de.BoundaryMeasure,
                    n_samples=1_000_000, seed=0, *,
                    norm_samples=200_000, norm_seed=0,
                    flow_t: float = 0.0) -> MeasureEstimate:
    """Monte Carlo estimate of the maximal-entropy measure of a box.

    flow_t measures the g^{flow_t}-image of the box (flow invariance says
    the value matches flow_t = 0 within errors).  The normalization depends
    only on the density, so it uses its own seed and is cached across boxes.
    """
    z_norm, z_se = knieper_normalization(surface, domain, density,
                                         n_samples=norm_samples,
                                         seed=norm_seed)
    rng = np.random.default_rng(seed)
    h = surface.entropy_h
    chunk = 100_000
    discarded = 0
    done = 0
    total = 0.0
    total_sq = 0.0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        xi, eta, disc = _sample_pairs(density, rng, m)
        discarded += disc
        w = _pair_weights(density.basepoint, xi, eta, h)
        vals = _trace_weighted_length(surface, domain, box, xi, eta, w,
                                      flow_t)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    mean_se = math.sqrt(var / n_samples)
    value = mean / z_norm
    # the normalization stream is independent: combine errors in quadrature
    se = value * math.hypot(mean_se / mean if mean > 0 else 0.0,
                            z_se / z_norm)
    return MeasureEstimate(value, se, n_samples, discarded,
                           {"normalization": z_norm,
                            "normalization_se": z_se, "seed": seed})


# ---------------------------------------------------------------------------
# conditional densities

@dataclass(frozen=True)
class ConditionalDensityQuery:
    v: hg.PhasePoint
    w: hg.PhasePoint
    kind: str  # "stable" | "unstable"

    def __post_init__(self):
        if self.kind not in ("stable", "unstable"):
            raise InvalidConfigurationError(f"unknown kind {self.kind!r}")


def conditional_density(query: ConditionalDensityQuery, h: float = 1.0) -> float:
    """Busemann factor of the conditional measure density.

    e^{-h b(pi v, pi w, w_inf)} for unstable, with w_-inf for stable; the
    mu-atom factor is reported separately by callers.
    """
    w_inf, w_minf = hg.endpoints(query.w)
    xi = w_inf if query.kind == "unstable" else w_minf
    return math.exp(-h * hg.busemann(query.v.base, query.w.base, xi))


@dataclass
class ExpansionReport:
    h: float
    rows: list  # (t, kind, ln_ratio, expected, error)
    max_error: float

    @property
    def passed(self):
        return self.max_error < 1e-9


def verify_expansion(v: hg.PhasePoint, w: hg.PhasePoint, t_grid,
                     h: float = 1.0) -> ExpansionReport:
    """Uniform expansion/contraction: conditionals scale by e^{+-h t}."""
    rows = []
    max_err = 0.0
    for kind, sign in (("unstable", +1.0), ("stable", -1.0)):
        base = conditional_density(ConditionalDensityQuery(v, w, kind), h)
        for t in t_grid:
            wt = hg.flow(w, float(t))
            val = conditional_density(ConditionalDensityQuery(v, wt, kind), h)
            ln_ratio = math.log(val / base)
            err = abs(ln_ratio - sign * h * t)
            rows.append((float(t), kind, ln_ratio, sign * h * t, err))
            max_err = max(max_err, err)
    return ExpansionReport(h, rows, max_err)


def asymptotic_partner(w: hg.PhasePoint, shift: float) -> hg.PhasePoint:
    """Phase point with the same forward endpoint and zero Busemann offset.

    Walks along the stable horocycle of w (centered at w_inf through pi w)
    by the given parameter and points the result at w_inf.
    """
    ca, cb = hg.carrier_ab(w.base.z, w.dir)
    # in carrier coordinates the forward endpoint is +1 and the base is 0;
    # the horocycle through 0 centered at 1 is |z - 1/2| = 1/2
    zloc = 0.5 + 0.5 * np.exp(1j * (math.pi + shift))
    z = complex(hg.mobius_apply_z(ca, cb, zloc))
    xi = complex(hg.mobius_boundary_z(ca, cb, 1.0 + 0j))
    theta = float(hg.direction_toward_z(z, xi))
    return hg.PhasePoint(hg.DiskPoint(z), theta)


@dataclass
class HolonomyReport:
    busemann_lhs: float
    busemann_rhs: float
    mu_lhs: float
    mu_rhs: float
    deviation: float
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.deviation < 0.05


def verify_holonomy(surface: fu.SurfaceModel, v, v2, w, w2,
                    density_R: float = 10.0, n_bins: int = 48,
                    *, ball: fu.Ball | None = None,
                    s: float | None = None) -> HolonomyReport:
    """Holonomy invariance dm_v^u(w) = dm_{v'}^u(w').

    Configuration: w' asymptotic to w (same forward endpoint, Busemann 0),
    v' asymptotic to v likewise, w on the weak-unstable set of v (shared
    backward endpoint).  The Busemann factors cancel analytically; the mu
    factors are compared through binned proxy densities at the two base
    points, so the residual is the binned transformation-law error.
    """
    h = surface.entropy_h
    if s is None:
        s = de.DEFAULT_S_FACTOR * h
    w_inf, w_minf = hg.endpoints(w)
    w2_inf, _ = hg.endpoints(w2)
    v_inf, v_minf = hg.endpoints(v)
    v2_inf, _ = hg.endpoints(v2)
    if abs(w_inf.u - w2_inf.u) > ASYMPTOTIC_TOL:
        raise InvalidConfigurationError("w' does not share the forward endpoint of w")
    if abs(hg.busemann(w.base, w2.base, w_inf)) > ASYMPTOTIC_TOL:
        raise InvalidConfigurationError("w' is not Busemann-synchronous with w")
    if abs(v_inf.u - v2_inf.u) > ASYMPTOTIC_TOL:
        raise InvalidConfigurationError("v' does not share the forward endpoint of v")
    if abs(hg.busemann(v.base, v2.base, v_inf)) > ASYMPTOTIC_TOL:
        raise InvalidConfigurationError("v' is not Busemann-synchronous with v")
    if abs(w_minf.u - v_minf.u) > ASYMPTOTIC_TOL:
        raise InvalidConfigurationError("w is not on the weak-unstable set of v")

    b_lhs = math.exp(-h * hg.busemann(v.base, w.base, w_inf))
    b_rhs = math.exp(-h * hg.busemann(v2.base, w2.base, w2_inf))

    if ball is None:
        ball = fu.enumerate_ball(surface, density_R)
    mu_v = de.ps_density(surface, v.base, s, density_R, ball=ball)
    mu_v2 = de.ps_density(surface, v2.base, s, density_R, ball=ball)
    bin_v = de.bin_masses(mu_v.atom_u, mu_v.weights, n_bins)
    bin_v2 = de.bin_masses(mu_v2.atom_u, mu_v2.weights, n_bins)
    j = int(de.bin_index(np.array([w_inf.u]), n_bins)[0])
    mu_lhs = float(bin_v[j])
    mu_rhs = float(bin_v2[j])
    if mu_lhs <= 0 or mu_rhs <= 0:
        raise DegenerateMeasureError("empty density bin at the holonomy endpoint")
    dev = abs((b_rhs * mu_rhs) / (b_lhs * mu_lhs) - 1.0)
    return HolonomyReport(b_lhs, b_rhs, mu_lhs, mu_rhs, dev,
                          {"bin": j, "n_bins": n_bins, "R": density_R, "s": s})
