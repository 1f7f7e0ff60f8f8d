"""Geodesics and scalar Jacobi/Riccati dynamics on conformal plane metrics.

Metrics are ds^2 = e^{2 phi(x,y)} (dx^2 + dy^2) with curvature
K = -e^{-2 phi} (phi_xx + phi_yy) <= 0.  The rank dichotomy on surfaces
reduces to the curvature along the orbit: a perpendicular parallel Jacobi
field exists iff K vanishes identically there, and the transversality
criterion reduces to the gap between the forward and backward Riccati limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, InvalidConfigurationError

DEFAULT_DT = 0.005
DEFAULT_T = 30.0
RANK_TOL = 1e-8            # sup|K| threshold for rank >= 2
GAP_TOL = 1e-6             # Riccati gap threshold for transversality
SPEED_DRIFT_LIMIT = 1e-4   # unit-speed monitor hard limit
RICCATI_BLOWUP = 1e6


@dataclass(frozen=True)
class ConformalMetric:
    """Conformal factor phi with analytic derivatives, K = -e^{-2phi} lap phi."""

    name: str
    phi: callable              # phi(x, y) -> real
    grad: callable             # (x, y) -> (phi_x, phi_y)
    laplacian: callable        # (x, y) -> phi_xx + phi_yy

    def curvature(self, x, y):
        return -np.exp(-2.0 * self.phi(x, y)) * self.laplacian(x, y)

    def check_nonpositive(self, tol=1e-12):
        """Grid check of the K <= 0 contract over the preset's chart domain."""
        ext = CHART_EXTENT.get(self.name, 3.0)
        g = np.linspace(-ext, ext, 41)
        xx, yy = np.meshgrid(g, g)
        kmax = float(self.curvature(xx, yy).max())
        if kmax > tol:
            raise InvalidConfigurationError(
                f"metric {self.name} has positive curvature {kmax}")
        return kmax


def _flat_strip_phi(x, y):
    t = np.maximum(np.abs(x) - 1.0, 0.0)
    return t ** 4


def _flat_strip_grad(x, y):
    t = np.maximum(np.abs(x) - 1.0, 0.0)
    return 4.0 * t ** 3 * np.sign(x), np.zeros_like(np.asarray(y, float))


def _flat_strip_lap(x, y):
    t = np.maximum(np.abs(x) - 1.0, 0.0)
    return 12.0 * t ** 2 + np.zeros_like(np.asarray(y, float))


def _constant_m1_phi(x, y):
    # Poincare-disk pullback: phi = ln(2 / (1 - r^2)); lap phi = e^{2 phi},
    # hence K = -1 exactly on the open unit disk
    return np.log(2.0) - np.log1p(-(x * x + y * y))


def _constant_m1_grad(x, y):
    u = 1.0 - (x * x + y * y)
    return 2.0 * x / u, 2.0 * y / u


def _constant_m1_lap(x, y):
    u = 1.0 - (x * x + y * y)
    return 4.0 / (u * u)


PRESETS = {
    "flat": ConformalMetric(
        "flat",
        lambda x, y: np.zeros_like(np.asarray(x, float)),
        lambda x, y: (np.zeros_like(np.asarray(x, float)),
                      np.zeros_like(np.asarray(y, float))),
        lambda x, y: np.zeros_like(np.asarray(x, float))),
    "strictly_negative": ConformalMetric(
        "strictly_negative",
        lambda x, y: x ** 2 + y ** 2,
        lambda x, y: (2.0 * x, 2.0 * y),
        lambda x, y: 4.0 + np.zeros_like(np.asarray(x, float))),
    "flat_strip": ConformalMetric(
        "flat_strip", _flat_strip_phi, _flat_strip_grad, _flat_strip_lap),
    "constant_m1": ConformalMetric(
        "constant_m1", _constant_m1_phi, _constant_m1_grad, _constant_m1_lap),
}


# half-side of the square (or radius of the disk) over which states are
# sampled and curvature is grid-checked; constant_m1 lives on the unit disk,
# and the curved presets are kept where |K| stays well above the rank
# tolerance so the dichotomy is sharp at the sampled starts
CHART_EXTENT = {"flat": 3.0, "strictly_negative": 2.0, "flat_strip": 2.0,
                "constant_m1": 0.65}


def sample_state(metric: ConformalMetric, rng) -> "GeodesicState":
    """Random initial state inside the preset's chart domain."""
    ext = CHART_EXTENT.get(metric.name, 3.0)
    if metric.name == "constant_m1":
        r = ext * math.sqrt(rng.uniform(0, 1))
        ang = rng.uniform(0, 2 * math.pi)
        x, y = r * math.cos(ang), r * math.sin(ang)
    else:
        x, y = rng.uniform(-ext, ext), rng.uniform(-ext, ext)
    return GeodesicState(x, y, rng.uniform(0, 2 * math.pi))


def load_metric(name: str) -> ConformalMetric:
    if name not in PRESETS:
        raise InvalidConfigurationError(
            f"unknown metric preset {name!r}; have {sorted(PRESETS)}")
    return PRESETS[name]


@dataclass(frozen=True)
class GeodesicState:
    x: float
    y: float
    theta: float               # direction angle in the chart
    s: float = 0.0             # arclength parameter


@dataclass
class Trajectory:
    metric: ConformalMetric
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    speed_drift: float         # max |  ||v||_g - 1  | observed

    @property
    def n(self):
        return len(self.s)

    def curvature_along(self):
        return self.metric.curvature(self.x, self.y)


def _rhs(metric, state):
    """Unit-speed conformal geodesic equations in (x, y, theta).

    x' = cos(theta) e^{-phi}, y' = sin(theta) e^{-phi},
    theta' = e^{-phi} (phi_x sin(theta) - phi_y cos(theta)),
    with ' = d/ds (metric arclength).  state has shape (3, n).
    """
    x, y, th = state
    px, py = metric.grad(x, y)
    em = np.exp(-metric.phi(x, y))
    c, s = np.cos(th), np.sin(th)
    return np.stack([em * c, em * s, em * (px * s - py * c)])


def _integrate_batch(metric, x0, y0, th0, T: float, dt: float):
    """RK4 over a batch of initial states; returns (s, out) with out shaped
    (steps + 1, 3, n)."""
    if abs(dt) > 1e-2 + 1e-15:
        raise InvalidConfigurationError("dt must be at most 1e-2")
    n = max(int(round(abs(T) / dt)), 1)
    h = math.copysign(abs(T) / n, T)
    state = np.stack([np.asarray(x0, float), np.asarray(y0, float),
                      np.asarray(th0, float)])
    out = np.empty((n + 1,) + state.shape)
    out[0] = state
    for i in range(n):
        k1 = _rhs(metric, state)
        k2 = _rhs(metric, state + 0.5 * h * k1)
        k3 = _rhs(metric, state + 0.5 * h * k2)
        k4 = _rhs(metric, state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = state
    return h * np.arange(n + 1), out


def _batch_drift(metric, s, out):
    """Max unit-speed violation per batch member, via midpoint derivatives."""
    x, y = out[:, 0], out[:, 1]
    dx = np.gradient(x, s, axis=0)
    dy = np.gradient(y, s, axis=0)
    sp = np.exp(metric.phi(x, y)) * np.hypot(dx, dy)
    if len(s) < 3:
        return np.zeros(x.shape[1])
    return np.abs(sp[1:-1] - 1.0).max(axis=0)


def integrate_geodesic(metric: ConformalMetric, s0: GeodesicState, T: float,
                       dt: float = DEFAULT_DT) -> Trajectory:
    """Classical RK4 on the conformal geodesic equations, unit metric speed.

    Negative T integrates backward.  Unit speed holds by construction; the
    monitor checks it via finite differences of the chart positions.
    """
    s, out = _integrate_batch(metric, [s0.x], [s0.y], [s0.theta], T, dt)
    drift = float(_batch_drift(metric, s, out)[0])
    if drift > SPEED_DRIFT_LIMIT:
        raise IntegrationError(
            f"unit-speed drift {drift:.2e} exceeds {SPEED_DRIFT_LIMIT}")
    return Trajectory(metric, s0.s + s, out[:, 0, 0], out[:, 1, 0],
                      out[:, 2, 0], drift)


# ---------------------------------------------------------------------------
# rank classification

@dataclass
class RankReport:
    rank: str                  # "rank_one" | "rank_ge_2"
    sup_abs_K: float
    T: float
    tol: float


def rank_classify(metric: ConformalMetric, s0: GeodesicState,
                  T: float = DEFAULT_T, tol: float = RANK_TOL) -> RankReport:
    """Finite-horizon rank dichotomy via curvature along the orbit.

    rank >= 2 iff sup |K| <= tol over the sampled trajectory on [-T, T]; the
    horizon is reported as part of the contract.
    """
    fwd = integrate_geodesic(metric, s0, T)
    bwd = integrate_geodesic(metric, s0, -T)
    sup = max(float(np.abs(fwd.curvature_along()).max()),
              float(np.abs(bwd.curvature_along()).max()))
    rank = "rank_ge_2" if sup <= tol else "rank_one"
    return RankReport(rank, sup, T, tol)


# ---------------------------------------------------------------------------
# Riccati subspaces

@dataclass
class RiccatiReport:
    u_stable: float
    u_unstable: float
    T: float

    @property
    def gap(self):
        return self.u_unstable - self.u_stable


def _riccati_along(K_vals, h):
    """Integrate u' = -K - u^2 along sampled curvature with RK4, u(0) = 0.

    K_vals has shape (steps + 1,) or (steps + 1, n_batch); returns the final
    u with the trailing shape.
    """
    K_vals = np.atleast_2d(np.asarray(K_vals, float).T).T
    u = np.zeros(K_vals.shape[1])

    def f(k, u):
        return -k - u * u

    for i in range(len(K_vals) - 1):
        k0, k1 = K_vals[i], K_vals[i + 1]
        km = 0.5 * (k0 + k1)
        a1 = f(k0, u)
        a2 = f(km, u + 0.5 * h * a1)
        a3 = f(km, u + 0.5 * h * a2)
        a4 = f(k1, u + h * a3)
        u = u + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        if (np.abs(u) > RICCATI_BLOWUP).any():
            raise IntegrationError(
                "Riccati blow-up under nonpositive curvature")
    return u if u.size > 1 else float(u[0])


def riccati_subspaces(metric: ConformalMetric, s0: GeodesicState,
                      T: float = DEFAULT_T,
                      dt: float = DEFAULT_DT) -> RiccatiReport:
    """Forward/backward Riccati limits at s0.

    u_unstable: integrate u' = -K - u^2 from s = -T (u = 0) forward to 0;
    u_stable: mirrored from s = +T backward.  With K <= 0 both stay finite
    and the initial condition washes out over the horizon.
    """
    bwd = integrate_geodesic(metric, s0, -T, dt)   # samples at 0, -h, ..., -T
    fwd = integrate_geodesic(metric, s0, T, dt)
    h = abs(fwd.s[1] - fwd.s[0])
    # unstable: along the past trajectory, oriented -T -> 0
    k_past = bwd.curvature_along()[::-1]
    u_unstable = _riccati_along(k_past, h)
    # stable: along the future trajectory reversed, +T -> 0; reversing the
    # orientation flips the sign of u
    k_future = fwd.curvature_along()[::-1]
    u_stable = -_riccati_along(k_future, h)
    return RiccatiReport(float(u_stable), float(u_unstable), T)


def unstable_jacobi(metric: ConformalMetric, s0: GeodesicState,
                    T: float = DEFAULT_T, dt: float = DEFAULT_DT):
    """Unstable Jacobi scalar J(s) with J(0) = 1, J'(0) = u_unstable.

    J(s) = exp(integral of u) along the forward orbit, with u integrated
    from the Riccati equation; nondecreasing for every preset (K <= 0).
    """
    rep = riccati_subspaces(metric, s0, T, dt)
    fwd = integrate_geodesic(metric, s0, T, dt)
    h = abs(fwd.s[1] - fwd.s[0])
    ks = fwd.curvature_along()
    u = rep.u_unstable
    js = [1.0]
    for i in range(len(ks) - 1):
        k0, k1 = ks[i], ks[i + 1]
        km = 0.5 * (k0 + k1)
        a1 = -k0 - u * u
        a2 = -km - (u + 0.5 * h * a1) ** 2
        a3 = -km - (u + 0.5 * h * a2) ** 2
        a4 = -k1 - (u + h * a3) ** 2
        u_next = u + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        js.append(js[-1] * math.exp(0.5 * h * (u + u_next)))
        u = u_next
    return fwd.s, np.array(js)


# ---------------------------------------------------------------------------
# suites

@dataclass
class RankSuiteResult:
    preset: str
    n_geodesics: int
    disagreements: int
    reports: list = field(default_factory=list)


def rank_suite(preset: str, n_geodesics: int = 100, seed: int = 0,
               T: float = DEFAULT_T, dt: float = DEFAULT_DT,
               tol: float = RANK_TOL) -> RankSuiteResult:
    """Classifier agreement: Riccati gap vs curvature along the orbit.

    All geodesics of a preset are integrated as one batch; both classifiers
    run on the same trajectories.
    """
    metric = load_metric(preset)
    metric.check_nonpositive()
    rng = np.random.default_rng(seed)
    states = [sample_state(metric, rng) for _ in range(n_geodesics)]
    x0 = [s.x for s in states]
    y0 = [s.y for s in states]
    th0 = [s.theta for s in states]
    s_f, fwd = _integrate_batch(metric, x0, y0, th0, T, dt)
    _, bwd = _integrate_batch(metric, x0, y0, th0, -T, dt)
    drift = np.maximum(_batch_drift(metric, s_f, fwd),
                       _batch_drift(metric, s_f, bwd))
    if (drift > SPEED_DRIFT_LIMIT).any():
        raise IntegrationError(
            f"unit-speed drift {drift.max():.2e} exceeds {SPEED_DRIFT_LIMIT}")
    h = abs(s_f[1] - s_f[0])
    k_fwd = metric.curvature(fwd[:, 0], fwd[:, 1])
    k_bwd = metric.curvature(bwd[:, 0], bwd[:, 1])
    sup_k = np.maximum(np.abs(k_fwd).max(axis=0), np.abs(k_bwd).max(axis=0))
    u_unstable = np.atleast_1d(_riccati_along(k_bwd[::-1], h))
    u_stable = -np.atleast_1d(_riccati_along(k_fwd[::-1], h))
    disagreements = 0
    reports = []
    for i, s0 in enumerate(states):
        rk = RankReport("rank_ge_2" if sup_k[i] <= tol else "rank_one",
                        float(sup_k[i]), T, tol)
        rc = RiccatiReport(float(u_stable[i]), float(u_unstable[i]), T)
        agree = (rc.gap > GAP_TOL) == (rk.rank == "rank_one")
        if not agree:
            disagreements += 1
        reports.append((s0, rk, rc, agree))
    return RankSuiteResult(preset, n_geodesics, disagreements, reports)


def dump_trajectory_csv(metric: ConformalMetric, s0: GeodesicState, T: float,
                        dt: float, path) -> None:
    """CSV dump (s, x, y, theta, K, u_stable, u_unstable) along the orbit."""
    import csv

    traj = integrate_geodesic(metric, s0, T, dt)
    ks = traj.curvature_along()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "x", "y", "theta", "K", "u_stable", "u_unstable"])
        stride = max(len(traj.s) // 1000, 1)
        for i in range(0, len(traj.s), stride):
            st = GeodesicState(float(traj.x[i]), float(traj.y[i]),
                               float(traj.theta[i]), float(traj.s[i]))
            rc = riccati_subspaces(metric, st, min(10.0, T), dt)
            w.writerow([repr(float(v)) for v in
                        (traj.s[i], traj.x[i], traj.y[i], traj.theta[i],
                         ks[i], rc.u_stable, rc.u_unstable)])
