"""Hamiltonian and geodesic flows on graph surfaces y = eta(x).

The co-metric of the graph surface is G(x, xi) = |xi|^2 - (grad eta . xi)^2 /
(1 + |grad eta|^2); the dispersive flow uses H = G^{3/4}, whose trajectories
are the geodesics of G up to the reparametrization phi_s = (3/4) int
G(Phi_sigma)^{-1/4} d sigma.  Non-trapping is diagnosed through the growth of
x . xi along trajectories, and escaping trajectories carry an asymptotic
direction xi_inf = lim xi_s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import FlowSingularityError, TrappedFlowError
from .symbols import radial_bump, radial_bump_grad

__all__ = [
    "SurfaceMetric",
    "flat_metric",
    "gaussian_bump_metric",
    "metric_from_samples",
    "Trajectory",
    "integrate_hamiltonian",
    "reparam_check",
    "asymptotic_direction",
    "nontrapping_diagnostic",
    "escape_symbol_surface",
    "escape_symbol_surface_min_transport",
]


@dataclass
class SurfaceMetric:
    """Graph surface y = eta(x) with analytic gradient and Hessian.

    eta, grad_eta, hess_eta take an (d,) point and return scalar, (d,), (d,d).
    """

    eta: callable
    grad_eta: callable
    hess_eta: callable
    dim: int = 1

    def G(self, x, xi):
        g = np.atleast_1d(self.grad_eta(x))
        xi = np.atleast_1d(xi)
        gxi = float(g @ xi)
        return float(xi @ xi) - gxi ** 2 / (1.0 + float(g @ g))

    def H(self, x, xi):
        return self.G(x, xi) ** 0.75

    def grad_G(self, x, xi):
        """(d_x G, d_xi G) at a single phase point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        g = np.atleast_1d(self.grad_eta(x))
        Hs = np.atleast_2d(self.hess_eta(x))
        m2 = 1.0 + float(g @ g)
        gxi = float(g @ xi)
        dxi = 2.0 * xi - 2.0 * gxi * g / m2
        dx = -2.0 * gxi * (Hs @ xi) / m2 + 2.0 * gxi ** 2 * (Hs @ g) / m2 ** 2
        return dx, dxi

    def hamilton_rhs_G(self, z):
        d = self.dim
        dx, dxi = self.grad_G(z[:d], z[d:])
        return np.concatenate([dxi, -dx])

    def hamilton_rhs_H(self, z):
        d = self.dim
        x, xi = z[:d], z[d:]
        G = self.G(x, xi)
        if G <= 0.0:
            raise FlowSingularityError(f"G <= 0 at x={x}, xi={xi}")
        dx, dxi = self.grad_G(x, xi)
        fac = 0.75 * G ** (-0.25)
        return np.concatenate([fac * dxi, -fac * dx])


def flat_metric(dim=1):
    return SurfaceMetric(
        eta=lambda x: 0.0,
        grad_eta=lambda x: np.zeros(dim),
        hess_eta=lambda x: np.zeros((dim, dim)),
        dim=dim,
    )


def gaussian_bump_metric(amplitude, width=1.0, center=0.0):
    """eta(x) = A exp(-(x-c)^2 / 2 w^2) in one dimension."""

    def eta(x):
        t = (float(np.atleast_1d(x)[0]) - center) / width
        return amplitude * math.exp(-0.5 * t * t)

    def grad(x):
        t = (float(np.atleast_1d(x)[0]) - center) / width
        return np.array([-amplitude * t / width * math.exp(-0.5 * t * t)])

    def hess(x):
        t = (float(np.atleast_1d(x)[0]) - center) / width
        return np.array([[amplitude * (t * t - 1.0) / width ** 2 * math.exp(-0.5 * t * t)]])

    return SurfaceMetric(eta, grad, hess, dim=1)


def metric_from_samples(field):
    """Spline adapter for a sampled surface: periodic cubic interpolation of eta.

    Used to couple water-wave surface snapshots to the ray tracer; flows need
    smooth off-grid derivatives the grid samples cannot provide directly.
    """
    grid = field.grid
    if grid.dim != 1:
        raise ValueError("sampled metric adapter is one-dimensional")
    xs = np.append(grid.axis_points(), 0.5 * grid.length)
    vals = np.real(field.values)
    vals = np.append(vals, vals[0])
    spl = CubicSpline(xs, vals, bc_type="periodic")
    d1 = spl.derivative(1)
    d2 = spl.derivative(2)
    L = grid.length

    def wrap(x):
        return (float(np.atleast_1d(x)[0]) + 0.5 * L) % L - 0.5 * L

    return SurfaceMetric(
        eta=lambda x: float(spl(wrap(x))),
        grad_eta=lambda x: np.array([float(d1(wrap(x)))]),
        hess_eta=lambda x: np.array([[float(d2(wrap(x)))]]),
        dim=1,
    )


@dataclass
class Trajectory:
    """Dense solution of a Hamiltonian flow, with conserved-energy bookkeeping."""

    metric: SurfaceMetric
    symbol: str  # "H" (G^{3/4}) or "G"
    s: np.ndarray
    states: np.ndarray  # (len(s), 2d)
    sol: object = dc_field(repr=False, default=None)
    tol: float = 1e-10
    nfev: int = 0

    @property
    def dim(self):
        return self.states.shape[1] // 2

    def state(self, s):
        return self.sol(s)

    def x(self, s):
        return self.sol(s)[: self.dim]

    def xi(self, s):
        return self.sol(s)[self.dim:]

    def velocity(self, s):
        z = self.sol(s)
        if self.symbol == "H":
            return self.metric.hamilton_rhs_H(z)
        return self.metric.hamilton_rhs_G(z)

    def energy(self, s):
        z = self.sol(s)
        d = self.dim
        val = self.metric.G(z[:d], z[d:])
        return val ** 0.75 if self.symbol == "H" else val

    def energy_drift(self):
        e = np.array([self.energy(s) for s in self.s])
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def _integrate(metric, z0, s_span, tol, symbol, extra_rhs=None, extra0=None, events=None):
    d = metric.dim
    rhs_core = metric.hamilton_rhs_H if symbol == "H" else metric.hamilton_rhs_G
    n_extra = 0 if extra0 is None else len(extra0)

    def rhs(s, y):
        dz = rhs_core(y[: 2 * d])
        if extra_rhs is None:
            return dz
        return np.concatenate([dz, extra_rhs(s, y[: 2 * d])])

    y0 = np.asarray(z0, dtype=float)
    if extra0 is not None:
        y0 = np.concatenate([y0, extra0])

    xi_floor = 1e-10 * max(1.0, float(np.linalg.norm(np.atleast_1d(z0)[d:])))

    def xi_vanishes(s, y):
        return float(np.linalg.norm(y[d: 2 * d])) - xi_floor

    xi_vanishes.terminal = True
    ev = [xi_vanishes] + (events or [])
    res = solve_ivp(
        rhs, s_span, y0, method="RK45", rtol=tol, atol=tol, dense_output=True, events=ev
    )
    if not res.success:
        raise FlowSingularityError(f"integration failed: {res.message}")
    if len(res.t_events[0]):
        raise FlowSingularityError(
            f"xi -> 0 at s = {res.t_events[0][0]:.6g}, x = {res.sol(res.t_events[0][0])[:d]}"
        )
    return res, n_extra


def integrate_hamiltonian(metric, z0, s_end, tol=1e-10, symbol="H"):
    """Adaptive RK45 solution of dz/ds = X_H(z) (or X_G with symbol="G")."""
    res, _ = _integrate(metric, z0, (0.0, s_end), tol, symbol)
    states = res.y.T[:, : 2 * metric.dim]
    return Trajectory(metric, symbol, res.t, states, sol=res.sol, tol=tol, nfev=res.nfev)


def reparam_check(metric, z0, s_end, tol=1e-10, n_samples=200):
    """Max |Phi_s - Geo_{phi_s}| with phi_s = (3/4) int G(Phi_sigma)^{-1/4} dsigma."""
    d = metric.dim

    def phi_rate(s, z):
        return np.array([0.75 * metric.G(z[:d], z[d:]) ** (-0.25)])

    res, _ = _integrate(metric, z0, (0.0, s_end), tol, "H",
                        extra_rhs=phi_rate, extra0=np.zeros(1))
    phi_end = res.y[-1, -1]
    geo = integrate_hamiltonian(metric, z0, phi_end, tol=tol, symbol="G")
    dev = 0.0
    for s in np.linspace(0.0, s_end, n_samples):
        y = res.sol(s)
        dev = max(dev, float(np.max(np.abs(y[: 2 * d] - geo.state(y[-1])))))
    return dev


def asymptotic_direction(
    metric, z0, s_max=1.0e3, escape_radius=None, tol=1e-10, cauchy_tol=1e-6
):
    """Escape a trajectory and extrapolate (xi_inf, z_inf) at dyadic checkpoints.

    z_s = x_s - x_0 - (3/2) int |xi|^{-1/2} xi converges together with xi_s on
    non-trapping surfaces with decaying curvature.  Returns (xi_inf, z_inf,
    trapped, info); trapped=True when |x| never exceeds the escape radius.
    """
    d = metric.dim
    z0 = np.asarray(z0, dtype=float)
    x0 = z0[:d]
    if escape_radius is None:
        escape_radius = 50.0 * float(np.linalg.norm(x0)) + 100.0

    def z_rate(s, z):
        x, xi = z[:d], z[d:]
        vel = metric.hamilton_rhs_H(z)[:d]
        return vel - 1.5 * float(np.linalg.norm(xi)) ** (-0.5) * xi

    def escaped(s, y):
        return float(np.linalg.norm(y[:d])) - escape_radius

    escaped.terminal = True
    res, _ = _integrate(metric, z0, (0.0, s_max), tol, "H",
                        extra_rhs=z_rate, extra0=np.zeros(d), events=[escaped])
    if not len(res.t_events[1]):
        return None, None, True, {"message": "no escape before s_max", "s_max": s_max}
    s_esc = float(res.t_events[1][0])

    checkpoints = [s_esc]
    prev = res.sol(s_esc)
    state = res.sol(s_esc)[: 2 * d]
    zq = res.sol(s_esc)[2 * d:]
    increments = []
    s_cur = s_esc
    xi_prev = prev[d: 2 * d]
    while s_cur < s_max:
        s_next = min(2.0 * s_cur, s_max)
        res2, _ = _integrate(
            metric, state, (s_cur, s_next), tol, "H", extra_rhs=z_rate, extra0=zq
        )
        y = res2.sol(s_next)
        state, zq = y[: 2 * d], y[2 * d:]
        inc = float(np.linalg.norm(state[d:] - xi_prev))
        increments.append(inc)
        checkpoints.append(s_next)
        xi_prev = state[d:]
        s_cur = s_next
        if inc < cauchy_tol:
            info = {"s_escape": s_esc, "checkpoints": checkpoints, "increments": increments}
            return state[d:].copy(), zq.copy(), False, info
    info = {"s_escape": s_esc, "checkpoints": checkpoints, "increments": increments,
            "message": "Cauchy tolerance not reached before s_max"}
    return state[d:].copy(), zq.copy(), False, info


def nontrapping_diagnostic(metric, z0, s_end, tol=1e-10, n_samples=2000):
    """Minimum of d/ds (x . xi) along the trajectory, and a positivity flag."""
    traj = integrate_hamiltonian(metric, z0, s_end, tol=tol)
    ss = np.linspace(0.0, s_end, n_samples)
    d = metric.dim
    vals = np.empty(n_samples)
    for i, s in enumerate(ss):
        z = traj.state(s)
        v = traj.velocity(s)
        vals[i] = float(z[:d] @ v[d:]) + float(v[:d] @ z[d:])
    min_slope = float(np.min(vals))
    return min_slope, min_slope > 0.0


# -- escape symbols along a trajectory ------------------------------------------


def escape_symbol_surface(s, x, xi, traj, lam, delta, nu, sign=+1, plateau=0.5):
    """chi^pm = phi((x - x_s)/(lam delta s)) phi((xi -/+ xi_s)/(delta - s^-nu)).

    Returns (value, transport = d_s chi +/- {H, chi}); requires s > 0 with
    delta > s^-nu.  x and xi may be arrays (d=1) for support sampling.
    """
    if s <= 0.0 or delta - s ** (-nu) <= 0.0:
        raise ValueError("need s > 0 and delta > s^-nu")
    d = traj.dim
    if d != 1:
        raise NotImplementedError("escape symbol sampling is one-dimensional")
    z = traj.state(s)
    v = traj.velocity(s)
    xs, xis = z[0], z[1]
    xdot, xidot = v[0], v[1]
    D = delta - s ** (-nu)
    sgn = 1.0 if sign >= 0 else -1.0

    phi = lambda t: radial_bump(t, plateau, 1.0)
    dphi = lambda t: radial_bump_grad(t, plateau, 1.0)

    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    u1 = (x - xs) / (lam * delta * s)
    u2 = (xi - sgn * xis) / D
    p1, p2 = phi(u1), phi(u2)
    g1, g2 = dphi(u1), dphi(u2)
    value = p1 * p2

    du1_ds = -xdot / (lam * delta * s) - u1 / s
    du2_ds = -sgn * xidot / D - u2 * nu * s ** (-nu - 1.0) / D
    ds_chi = g1 * du1_ds * p2 + p1 * g2 * du2_ds

    # {H, chi} pointwise with analytic metric derivatives
    shape = np.broadcast(x, xi).shape
    dH_dxi = np.empty(shape)
    dH_dx = np.empty(shape)
    xb = np.broadcast_to(x, shape)
    xib = np.broadcast_to(xi, shape)
    it = np.nditer(xb, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        px, pxi = float(xb[idx]), float(xib[idx])
        G = traj.metric.G(np.array([px]), np.array([pxi]))
        dxg, dxig = traj.metric.grad_G(np.array([px]), np.array([pxi]))
        fac = 0.75 * G ** (-0.25)
        dH_dx[idx] = fac * dxg[0]
        dH_dxi[idx] = fac * dxig[0]
    poisson = dH_dxi * g1 / (lam * delta * s) * p2 - dH_dx * p1 * g2 / D
    transport = ds_chi + sgn * poisson
    return value, transport


def escape_symbol_surface_fd(s, x, xi, traj, lam, delta, nu, sign=+1, plateau=0.5,
                             step=1e-4):
    """Finite-difference transport derivative of chi^pm (oracle for the analytic one)."""

    def chi(ss, xx, xxi):
        z = traj.state(ss)
        D = delta - ss ** (-nu)
        sgn = 1.0 if sign >= 0 else -1.0
        return (radial_bump((xx - z[0]) / (lam * delta * ss), plateau, 1.0)
                * radial_bump((xxi - sgn * z[1]) / D, plateau, 1.0))

    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    ds = (chi(s + step, x, xi) - chi(s - step, x, xi)) / (2.0 * step)
    dchi_dx = (chi(s, x + step, xi) - chi(s, x - step, xi)) / (2.0 * step)
    dchi_dxi = (chi(s, x, xi + step) - chi(s, x, xi - step)) / (2.0 * step)

    shape = np.broadcast(x, xi).shape
    dH_dx = np.empty(shape)
    dH_dxi = np.empty(shape)
    xb = np.broadcast_to(x, shape)
    xib = np.broadcast_to(xi, shape)
    it = np.nditer(xb, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        px, pxi = float(xb[idx]), float(xib[idx])
        dH_dx[idx] = (traj.metric.H(np.array([px + step]), np.array([pxi]))
                      - traj.metric.H(np.array([px - step]), np.array([pxi]))) / (2 * step)
        dH_dxi[idx] = (traj.metric.H(np.array([px]), np.array([pxi + step]))
                       - traj.metric.H(np.array([px]), np.array([pxi - step]))) / (2 * step)
    sgn = 1.0 if sign >= 0 else -1.0
    return ds + sgn * (dH_dxi * dchi_dx - dH_dx * dchi_dxi)


def escape_symbol_surface_min_transport(
    traj, s, lam, delta, nu, sign=+1, nx=40, nxi=40, plateau=0.5
):
    """Minimum of the transport derivative over a sample of supp chi^pm."""
    z = traj.state(s)
    xs, xis = z[0], z[1]
    D = delta - s ** (-nu)
    sgn = 1.0 if sign >= 0 else -1.0
    xr = np.linspace(xs - lam * delta * s, xs + lam * delta * s, nx)
    xir = np.linspace(sgn * xis - D, sgn * xis + D, nxi)
    X, XI = np.meshgrid(xr, xir)
    val, tr = escape_symbol_surface(s, X, XI, traj, lam, delta, nu, sign, plateau)
    mask = val > 0
    if not np.any(mask):
        return 0.0
    return float(np.min(tr[mask]))
