"""Fractional-dispersion model equation and its propagation experiments.

The flow is u_t + i |D|^gamma u = 0, gamma >= 1, solved exactly on the
lattice by the multiplier exp(-i t |xi|^gamma).  Two experiment families
probe the quasi-homogeneous wavefront of the solution:

* transport: under rho*gamma = delta + rho, a (delta,rho)-singularity at
  (x0, xi0) moves to (x0 + t gamma |xi0|^{gamma-2} xi0, xi0);
* smoothing: under rho*gamma > delta + rho, near-delta data develops
  (rho(gamma-1), rho)-singularities exactly on the dispersive ray
  (t gamma |xi0|^{gamma-2} xi0, xi0).

Singular data is encoded by a multi-scale packet family: one normalized
packet per probed scale h, placed at (h^-delta x0, h^-rho xi0) and weighted
h^mu, which realizes decay order mu at the probe and rapid decay elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid, l2_norm, multiplier_apply, wave_packet
from .quantize import (
    ProbeResult,
    WavefrontReport,
    estimate_decay_order,
    valid_h_grid,
)
from .symbols import radial_bump, radial_bump_grad, window_symbol

__all__ = [
    "ModelParams",
    "propagate_fractional",
    "PacketTrack",
    "ScaledWitness",
    "scaled_singularity_witness",
    "near_delta_field",
    "transport_experiment",
    "smoothing_experiment",
    "free_schrodinger_limit",
    "gaussian_free_evolution",
    "escape_symbol_model",
    "escape_symbol_model_fd",
    "geometric_h_grid",
]


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    t: float
    grid: Grid

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ValueError(f"dispersion exponent gamma must be >= 1, got {self.gamma}")


def propagate_fractional(u0, t, gamma):
    """Exact lattice solution of u_t + i|D|^gamma u = 0 at time t."""
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    if u0.grid.dim == 1:
        m = lambda xi: np.exp(-1j * t * np.abs(xi) ** gamma)
    else:
        m = lambda xi: np.exp(-1j * t * (np.hypot(xi[0], xi[1])) ** gamma)
    return multiplier_apply(u0, m)


def group_shift(xi, t, gamma):
    """Displacement t gamma |xi|^{gamma-2} xi of the Hamiltonian flow of |xi|^gamma."""
    return t * gamma * abs(xi) ** (gamma - 2.0) * xi


def geometric_h_grid(h_max, ratio, count):
    return [h_max * ratio ** j for j in range(count)]


# -- witnesses -----------------------------------------------------------------


@dataclass
class PacketTrack:
    """Bookkeeping for one Gaussian packet of the witness family."""

    x: float
    xi: float
    width: float
    weight: float

    def at_time(self, t, gamma):
        x_t = self.x + group_shift(self.xi, t, gamma)
        curv = gamma * (gamma - 1.0) * abs(self.xi) ** (gamma - 2.0) if gamma != 1.0 else 0.0
        w_t = math.sqrt(self.width ** 2 + (t * curv / self.width) ** 2)
        return PacketTrack(x_t, self.xi, w_t, self.weight)

    @property
    def sigma_xi(self):
        return 1.0 / self.width


@dataclass
class ScaledWitness:
    field: Field
    tracks: list
    x0: float
    xi0: float
    delta: float
    rho: float
    mu: float
    h_list: list


def scaled_singularity_witness(
    grid, x0, xi0, delta, rho, h_list, mu=0.0, width_factor=1.0, amplitude=1.0
):
    """Sum of unit-L2 packets at (h^-delta x0, h^-rho xi0), weighted h^mu.

    Packet widths balance the probing windows: w ~ sqrt(x-radius / xi-radius),
    floored at 2.5 dx so every packet stays resolved.
    """
    if xi0 == 0.0:
        raise ValueError("witness needs xi0 != 0")
    vals = np.zeros(grid.n, dtype=np.complex128)
    tracks = []
    r_x = 0.25 * max(abs(x0), 1.0)
    r_xi = 0.25 * abs(xi0)
    for h in h_list:
        X = x0 * h ** (-delta)
        XI = xi0 * h ** (-rho)
        w = width_factor * math.sqrt((r_x * h ** (-delta)) / (r_xi * h ** (-rho)))
        w = max(w, 2.5 * grid.spacing)
        weight = amplitude * h ** mu
        pk = wave_packet(grid, X, XI, w, normalize=True)
        vals += weight * pk.values
        tracks.append(PacketTrack(X, XI, w, weight))
    return ScaledWitness(Field(grid, vals), tracks, x0, xi0, delta, rho, mu, list(h_list))


def near_delta_field(grid, x0=0.0, width=None):
    """Mass-one Gaussian of width 2dx: the lattice surrogate of a delta."""
    if width is None:
        width = 2.0 * grid.spacing
    x = grid.axis_points()
    vals = np.exp(-((x - x0) ** 2) / (2.0 * width ** 2)) / (math.sqrt(2.0 * math.pi) * width)
    return Field(grid, vals.astype(np.complex128))


# -- control placement ---------------------------------------------------------


def _window_radii(x0, xi0):
    return 0.25 * max(abs(x0), 1.0), 0.25 * abs(xi0)


def _track_clean(xc, xic, delta, rho, tracks, h_grid, sigma_margin=2.5):
    """True when no witness packet leaks into the scaled window at any h."""
    r_x, r_xi = _window_radii(xc, xic)
    for h in h_grid:
        xlo, xhi = (xc - r_x) * h ** (-delta), (xc + r_x) * h ** (-delta)
        if xlo > xhi:
            xlo, xhi = xhi, xlo
        flo, fhi = (xic - r_xi) * h ** (-rho), (xic + r_xi) * h ** (-rho)
        if flo > fhi:
            flo, fhi = fhi, flo
        for tr in tracks:
            dx = max(xlo - tr.x, tr.x - xhi, 0.0) / tr.width
            dxi = max(flo - tr.xi, tr.xi - fhi, 0.0) / tr.sigma_xi
            if dx ** 2 + dxi ** 2 < sigma_margin ** 2:
                return False
    return True


def _pick_controls(candidates, tracks, delta, rho, grid, h_grid, want=4):
    controls = []
    for (xc, xic, label) in candidates:
        usable = valid_h_grid(grid, xc, xic, delta, rho, h_grid)
        if len(usable) < 3:
            continue
        if not _track_clean(xc, xic, delta, rho, tracks, usable):
            continue
        controls.append((xc, xic, label))
        if len(controls) >= want:
            break
    if len(controls) < want:
        raise ConfigError(
            f"only {len(controls)} clean control probes available (need {want}); "
            "adjust the experiment geometry"
        )
    return controls


def _run_probes(u, entries, delta, rho, h_grid):
    probes = []
    for (xc, xic, label) in entries:
        fit = estimate_decay_order(u, xc, xic, delta, rho, h_grid=h_grid)
        probes.append(
            ProbeResult(
                x0=xc, xi0=xic, delta=delta, rho=rho,
                mu_hat=fit.mu_hat, r2=fit.r2, label=label,
                h_used=fit.h_used, norms=fit.norms,
            )
        )
    return probes


# -- experiments ---------------------------------------------------------------


def transport_experiment(
    grid,
    x0,
    xi0,
    gamma,
    delta,
    rho,
    t0,
    h_grid,
    mu=0.0,
    width_factor=1.0,
    n_controls=4,
    min_h=6,
):
    """Propagate a (delta,rho)-singularity witness and probe the transported point.

    Requires rho*gamma = delta + rho (the scaling under which the wavefront is
    carried by the Hamiltonian flow of |xi|^gamma).
    """
    if abs(rho * gamma - (delta + rho)) > 1e-12:
        raise ConfigError(f"transport scaling needs rho*gamma = delta+rho, got "
                          f"{rho*gamma} vs {delta+rho}")
    if xi0 == 0.0:
        raise ConfigError("xi0 must be nonzero")
    x_pred = x0 + group_shift(xi0, t0, gamma)

    # witness scales and the main probes share the h values that keep both the
    # initial and the transported window inside the box/Nyquist budget
    hs_use = [
        h for h in valid_h_grid(grid, x0, xi0, delta, rho, h_grid)
        if h in valid_h_grid(grid, x_pred, xi0, delta, rho, h_grid)
    ]
    if len(hs_use) < min_h:
        raise ConfigError(
            f"only {len(hs_use)} h values fit the box/Nyquist budget (need {min_h}); "
            "shrink |x0|, |xi0|, |t0| or the h range"
        )

    witness = scaled_singularity_witness(grid, x0, xi0, delta, rho, hs_use, mu=mu,
                                         width_factor=width_factor)
    u_t = propagate_fractional(witness.field, t0, gamma)
    moved = [tr.at_time(t0, gamma) for tr in witness.tracks]

    candidates = [
        (x0, xi0, "control_initial"),
        (-x_pred, xi0, "control_reflected"),
        (x_pred, 2.0 * xi0, "control_double_xi"),
        (-x_pred, 2.0 * xi0, "control_reflected_double_xi"),
        (x_pred, -xi0, "control_neg_xi"),
        (x_pred, -2.0 * xi0, "control_neg_double_xi"),
        (x_pred, 0.5 * xi0, "control_half_xi"),
        (2.5 * x_pred, xi0, "control_far_x"),
        (0.4 * x_pred, xi0, "control_near_x"),
        (-0.4 * x_pred, xi0, "control_reflected_near_x"),
    ]
    # drop duplicates and anything coinciding with the prediction (e.g. t0 = 0)
    seen, dedup = set(), []
    for (xc, xic, label) in candidates:
        key = (round(xc, 9), round(xic, 9))
        if key in seen or key == (round(x_pred, 9), round(xi0, 9)):
            continue
        seen.add(key)
        dedup.append((xc, xic, label))
    controls = _pick_controls(dedup, moved, delta, rho, grid, hs_use, want=n_controls)

    entries = [(x_pred, xi0, "predicted")] + controls
    probes = _run_probes(u_t, entries, delta, rho, hs_use)
    report = WavefrontReport(
        probes,
        list(hs_use),
        meta={
            "experiment": "model_transport",
            "requested_h_grid": list(h_grid),
            "gamma": gamma, "delta": delta, "rho": rho,
            "x0": x0, "xi0": xi0, "t0": t0, "x_pred": x_pred,
            "witness_mu": mu,
            "grid": {"n": grid.n, "length": grid.length},
            "separation": _separation(probes),
        },
    )
    return report


def _separation(probes):
    pred = [p.mu_hat for p in probes if p.label == "predicted"]
    ctrl = [p.mu_hat for p in probes if p.label.startswith("control")]
    if not pred or not ctrl:
        return None
    lo = min(ctrl)
    if math.isinf(lo):
        return math.inf
    return lo - pred[0]


def _locus_clean(xc, xic, x_pred, xi0, gamma, pad=1.15):
    """Check that a probe window avoids the dispersive locus x = t g |xi|^{g-2} xi.

    Scale-invariantly, the x-window [0.75, 1.25] |xc| corresponds to stationary
    frequencies (|x| / (t gamma))^{1/(gamma-1)}; the probe is clean when that
    interval (padded) misses its xi-window, or the signs disagree.
    """
    if np.sign(xc) != np.sign(xic) or xc == 0.0:
        return True
    p = 1.0 / (gamma - 1.0)
    base = abs(xc / x_pred)
    lo = (0.75 * base) ** p * abs(xi0) / pad
    hi = (1.25 * base) ** p * abs(xi0) * pad
    wlo, whi = 0.75 * abs(xic), 1.25 * abs(xic)
    if hi < wlo:
        return True
    # below the locus the phase gradient only grows like h^{-rho/p}; for
    # gamma < 2 that is too weak to suppress leakage at desk-scale h
    return lo > whi and gamma >= 2.0 - 1e-9


def smoothing_experiment(
    grid,
    xi0,
    gamma,
    delta,
    rho,
    t0,
    h_grid,
    source_x=0.0,
    delta_width=None,
    min_h=6,
):
    """Evolve near-delta data and probe the (rho(gamma-1), rho) wavefront.

    Requires gamma > 1 and rho*gamma > delta + rho; the singular locus of the
    evolved field is the dispersive ray (t0 gamma |xi|^{gamma-2} xi, xi).
    """
    if gamma <= 1.0:
        raise ConfigError("smoothing needs gamma > 1")
    if rho * gamma <= delta + rho:
        raise ConfigError("smoothing scaling needs rho*gamma > delta+rho")
    if t0 == 0.0:
        raise ConfigError("smoothing needs t0 != 0")
    dp = rho * (gamma - 1.0)

    # snap xi0 to the dual lattice
    dxi = grid.freq_spacing
    xi0 = round(xi0 / dxi) * dxi
    if xi0 == 0.0:
        raise ConfigError("xi0 rounds to zero on this lattice")

    u0 = near_delta_field(grid, x0=source_x, width=delta_width)
    u_t = propagate_fractional(u0, t0, gamma)
    x_pred = group_shift(xi0, t0, gamma)

    hs_use = valid_h_grid(grid, x_pred, xi0, dp, rho, h_grid)
    if len(hs_use) < min_h:
        raise ConfigError(
            f"only {len(hs_use)} h values fit the box/Nyquist budget (need {min_h})"
        )

    candidates = [
        (x_pred, 2.0 * xi0, "control_double_xi"),
        (x_pred, 0.5 * xi0, "control_half_xi"),
        (x_pred, 4.0 * xi0, "control_quad_xi"),
        (x_pred, 0.25 * xi0, "control_quarter_xi"),
        (0.5 * x_pred, xi0, "control_half_x"),
        (2.0 * x_pred, xi0, "control_double_x"),
        (-x_pred, xi0, "control_reflected"),
    ]
    kept = [(x_pred, xi0, "predicted")]
    for (xc, xic, label) in candidates:
        if len(valid_h_grid(grid, xc, xic, dp, rho, hs_use)) < 3:
            continue
        if not _locus_clean(xc, xic, x_pred, xi0, gamma, pad=1.15):
            continue
        kept.append((xc, xic, label))
    probes = _run_probes(u_t, kept, dp, rho, hs_use)
    return WavefrontReport(
        probes,
        list(hs_use),
        meta={
            "experiment": "model_smoothing",
            "gamma": gamma, "delta": delta, "rho": rho,
            "probe_delta": dp, "probe_rho": rho,
            "xi0": xi0, "t0": t0, "x_pred": x_pred,
            "source_x": source_x,
            "delta_width": delta_width if delta_width is not None else 2.0 * grid.spacing,
            "grid": {"n": grid.n, "length": grid.length},
            "separation": _separation(probes),
        },
    )


# -- free Schroedinger kernel --------------------------------------------------


def gaussian_free_evolution(grid, sigma, t_schrodinger, x0=0.0):
    """Closed form of exp(i t Delta / 2) applied to a mass-one Gaussian.

    The half-Laplacian convention matches the explicit kernel
    exp(-i pi d/4) (2 pi t)^{-d/2} exp(i|x-x0|^2/2t) of the delta evolution;
    in model time this is propagate_fractional(u0, t/2, gamma=2).
    """
    x = grid.axis_points()
    a = sigma ** 2 + 1j * t_schrodinger
    vals = np.exp(-((x - x0) ** 2) / (2.0 * a)) / np.sqrt(2.0 * np.pi * a)
    return Field(grid, vals)


def free_schrodinger_limit(grid, widths, t_schrodinger, window=1.4):
    """Evolve mass-one Gaussians of decreasing width under exp(i t Delta / 2).

    Returns rows (width, max over |x| <= window of the relative deviation of
    the modulus from (2 pi t)^{-1/2}, closed-form agreement over the box).
    As width -> 2dx the modulus approaches the delta-kernel constant on the
    observation window; the residual envelope exp(-x^2 w^2 / 2 t^2) caps how
    far out the flat plateau extends.
    """
    target = (2.0 * np.pi * t_schrodinger) ** (-0.5)
    mask = np.abs(grid.axis_points()) <= window
    rows = []
    for w in widths:
        u0 = near_delta_field(grid, width=w)
        u_t = propagate_fractional(u0, 0.5 * t_schrodinger, 2.0)
        exact = gaussian_free_evolution(grid, w, t_schrodinger)
        closed_form_err = float(
            np.max(np.abs(u_t.values - exact.values)) / np.max(np.abs(exact.values))
        )
        flatness = float(np.max(np.abs(np.abs(u_t.values[mask]) - target)) / target)
        rows.append({"width": w, "modulus_deviation": flatness,
                     "closed_form_error": closed_form_err})
    return rows


# -- escape symbol (transport to infinity) -------------------------------------


def escape_symbol_model(s, x, xi, x0, xi0, gamma, eps, phi=None, phi_grad=None,
                        plateau=0.5):
    """Escape symbol chi = phi((x - s g(xi) - x0)/(1+s)) phi((xi - xi0)/eps).

    Returns (value, transport derivative d_s chi + {|xi|^gamma, chi}) using the
    closed form of the transport derivative, which is pointwise >= 0 for
    radial decreasing phi.
    """
    if phi is None:
        phi = lambda z: radial_bump(z, plateau, 1.0)
        phi_grad = lambda z: radial_bump_grad(z, plateau, 1.0)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    gxi = gamma * np.abs(xi) ** (gamma - 2.0) * xi
    A = x - s * gxi - x0
    arg1 = A / (1.0 + s)
    arg2 = (xi - xi0) / eps
    value = phi(arg1) * phi(arg2)
    transport = -phi_grad(arg1) * phi(arg2) * A / (1.0 + s) ** 2
    return value, transport


def escape_symbol_model_fd(s, x, xi, x0, xi0, gamma, eps, step=1e-4, plateau=0.5):
    """Centered finite-difference transport derivative (oracle for the closed form)."""

    def chi(ss, xx, xxi):
        gxi = gamma * np.abs(xxi) ** (gamma - 2.0) * xxi
        return (radial_bump((xx - ss * gxi - x0) / (1.0 + ss), plateau, 1.0)
                * radial_bump((xxi - xi0) / eps, plateau, 1.0))

    ds = (chi(s + step, x, xi) - chi(s - step, x, xi)) / (2.0 * step)
    dx = (chi(s, x + step, xi) - chi(s, x - step, xi)) / (2.0 * step)
    gxi = gamma * np.abs(xi) ** (gamma - 2.0) * xi
    # {|xi|^gamma, chi} = d_xi(|xi|^gamma) . d_x chi (the symbol has no explicit x-dependence)
    return ds + gxi * dx
