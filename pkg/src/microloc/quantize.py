"""Quasi-homogeneous quantization, weighted norms, and wavefront probing.

op_quantize realizes the Kohn-Nirenberg action of a(h^delta x, h^rho xi):

    (op u)(x) = (2 pi)^-d * sum_xi exp(i x xi) a(h^delta x, h^rho xi) uhat(xi) dxi.

Wavefront orders are estimated by sweeping h over a geometric grid, applying
a window symbol elliptic at the probe point, and regressing log L2-norm
against log h: decay O(h^mu) shows up as slope mu.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import GridMismatchError
from .grid import Field, Grid, l2_norm, multiplier_apply, spectrum
from .symbols import Symbol, plateau_bump, window_symbol

__all__ = [
    "op_quantize",
    "weighted_norm",
    "DyadicPartition",
    "make_dyadic_partition",
    "dyadic_norm",
    "default_h_grid",
    "valid_h_grid",
    "estimate_decay_order",
    "DecayFit",
    "ProbeSpec",
    "ProbeResult",
    "WavefrontReport",
    "is_singular_at_order",
    "TOL_ORDER",
    "NORM_FLOOR",
]

TOL_ORDER = 0.5  # membership tolerance: regression slopes on 6-8 points carry ~0.2-0.4 noise
NORM_FLOOR = 1e-14


def _dense_apply_1d(a, u, h, delta, rho, chunk=512):
    grid = u.grid
    x = grid.axis_points()
    xi = grid.axis_frequencies()
    uhat = spectrum(u)
    phase = (-1.0) ** grid.axis_wavenumbers()
    out = np.empty(grid.n, dtype=np.complex128)
    hx = h ** delta
    hxi = h ** rho
    for lo in range(0, grid.n, chunk):
        hi = min(lo + chunk, grid.n)
        block = np.asarray(a(hx * x[lo:hi, None], hxi * xi[None, :]), dtype=np.complex128)
        rows = np.fft.ifft(phase[None, :] * (block * uhat[None, :]), axis=1) / grid.spacing
        out[lo:hi] = rows[np.arange(hi - lo), np.arange(lo, hi)]
    return Field(grid, out)


def _dense_apply_2d(a, u, h, delta, rho, chunk=64):
    grid = u.grid
    n = grid.n
    xs = grid.axis_points()
    xi1, xi2 = grid.frequencies()
    uhat = spectrum(u)
    p = (-1.0) ** grid.axis_wavenumbers()
    phase = np.multiply.outer(p, p)
    hx = h ** delta
    hxi = h ** rho
    out = np.empty((n, n), dtype=np.complex128)
    xi_args = (hxi * xi1[None, :, :], hxi * xi2[None, :, :])
    for i in range(n):
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            x_args = (
                np.full((hi - lo, 1, 1), hx * xs[i]),
                hx * xs[lo:hi][:, None, None],
            )
            block = np.asarray(a(x_args, xi_args), dtype=np.complex128)
            rows = np.fft.ifft2(phase[None, :, :] * (block * uhat[None, :, :]), axes=(1, 2))
            rows /= grid.spacing ** 2
            out[i, lo:hi] = rows[np.arange(hi - lo), i, np.arange(lo, hi)]
    return Field(grid, out)


def op_quantize(a, u, h, delta=0.0, rho=0.0, force_dense=False):
    """Apply op_h^{delta,rho}(a) to u.

    Separable symbols take the fast path sum_m c_m(h^delta x) m_m(h^rho xi)
    applied as multiplier + pointwise product; otherwise a dense sweep over
    the phase-space lattice is used.  Both paths agree to ~1e-10.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if delta < 0 or rho < 0:
        raise ValueError("delta and rho must be nonnegative")
    grid = u.grid
    if not force_dense and getattr(a, "separable", None):
        hx = h ** delta
        hxi = h ** rho
        if grid.dim == 1:
            xargs = hx * grid.axis_points()
        else:
            x1, x2 = grid.points()
            xargs = (hx * x1, hx * x2)
        out = np.zeros((grid.n,) * grid.dim, dtype=np.complex128)
        for (cx, mxi) in a.separable:
            if grid.dim == 1:
                mf = multiplier_apply(u, lambda xi, mxi=mxi: mxi(hxi * xi), nyquist_even=False)
            else:
                mf = multiplier_apply(
                    u, lambda xi, mxi=mxi: mxi((hxi * xi[0], hxi * xi[1])), nyquist_even=False
                )
            out += np.asarray(cx(xargs), dtype=np.complex128) * mf.values
        return Field(grid, out)
    if grid.dim == 1:
        return _dense_apply_1d(a, u, h, delta, rho)
    return _dense_apply_2d(a, u, h, delta, rho)


def weighted_norm(u, nu=0.0, k=0.0):
    """Weighted Sobolev norm || <x>^k <D>^nu u ||_L2."""
    grid = u.grid
    if nu == 0.0:
        smoothed = u
    else:
        if grid.dim == 1:
            smoothed = multiplier_apply(u, lambda xi: (1.0 + xi ** 2) ** (nu / 2.0))
        else:
            smoothed = multiplier_apply(
                u, lambda xi: (1.0 + xi[0] ** 2 + xi[1] ** 2) ** (nu / 2.0)
            )
    if k == 0.0:
        return l2_norm(smoothed)
    if grid.dim == 1:
        w = (1.0 + grid.axis_points() ** 2) ** (k / 2.0)
    else:
        x1, x2 = grid.points()
        w = (1.0 + x1 ** 2 + x2 ** 2) ** (k / 2.0)
    return l2_norm(Field(grid, w * smoothed.values))


# -- dyadic partitions ---------------------------------------------------------


@dataclass
class DyadicPartition:
    """Radial dyadic partition of unity: supp psi_j in {2^j/C <= |x| <= C 2^j}."""

    grid: Grid
    pieces: list = dc_field(repr=False)  # list of ndarray samples, index j = 0..J
    C: float = 2.0

    @property
    def J(self):
        return len(self.pieces) - 1

    def neighbor_sum(self, j, width):
        """psi~_j = sum_{|k-j| <= width} psi_k, clipped to the available range."""
        lo = max(0, j - width)
        hi = min(self.J, j + width)
        acc = np.zeros_like(self.pieces[0])
        for k in range(lo, hi + 1):
            acc = acc + self.pieces[k]
        return acc


def make_dyadic_partition(grid, C=2.0):
    """Build the telescoped radial partition psi_0 + psi_1 + ... = 1.

    Uses theta_j(x) = Theta(|x| / 2^j) with Theta = 1 on r <= 1 and 0 on
    r >= C, and psi_j = theta_j - theta_{j-1}; the telescoping makes the sum
    exactly 1.  This construction needs C >= 2 (the ring lower edge is the
    previous plateau edge 2^{j-1} = 2^j / 2).
    """
    if C < 2.0:
        raise ValueError("telescoped partition requires C >= 2")
    if grid.dim == 1:
        r = np.abs(grid.axis_points())
    else:
        x1, x2 = grid.points()
        r = np.hypot(x1, x2)
    half_diag = 0.5 * grid.length * math.sqrt(grid.dim)
    J = max(0, math.ceil(math.log2(half_diag)))
    if J < 3:
        raise ValueError(
            f"grid too small for a dyadic partition: needs >= 3 rings, box gives J={J}"
        )

    def theta(rr):
        return plateau_bump(rr, 1.0, C)

    pieces = []
    prev = None
    for j in range(J + 1):
        cur = theta(r / 2.0 ** j)
        pieces.append(cur if prev is None else cur - prev)
        prev = cur
    return DyadicPartition(grid, pieces, C)


def dyadic_norm(u, nu, k, part):
    """sqrt( sum_j 2^{2jk} || psi_j u ||_{H^nu}^2 ), the dyadic H^nu_k norm."""
    if not part.grid.compatible(u.grid):
        raise GridMismatchError("partition built on a different grid")
    total = 0.0
    for j, psi in enumerate(part.pieces):
        piece = Field(u.grid, psi * u.values)
        total += 4.0 ** (j * k) * weighted_norm(piece, nu, 0.0) ** 2
    return math.sqrt(total)


# -- wavefront probing ---------------------------------------------------------


def default_h_grid():
    """h = 2^-2 ... 2^-9, geometric ratio 1/2."""
    return [2.0 ** (-j) for j in range(2, 10)]


def valid_h_grid(grid, x0, xi0, delta, rho, h_grid, r_x=None, r_xi=None, margin=0.95):
    """Drop h values whose scaled window leaves the box or passes Nyquist.

    The window around (x0, xi0) occupies |x| <= h^-delta (|x0| + r_x) and
    |xi| <= h^-rho (|xi0| + r_xi); quantization pushes mass there, so the
    discrete box must contain it.
    """
    absx0 = float(np.linalg.norm(np.atleast_1d(np.asarray(x0, dtype=float))))
    absxi0 = float(np.linalg.norm(np.atleast_1d(np.asarray(xi0, dtype=float))))
    if r_x is None:
        r_x = 0.25 * max(absx0, 1.0)
    if r_xi is None:
        r_xi = 0.25 * absxi0
    keep = []
    for h in h_grid:
        x_reach = h ** (-delta) * (absx0 + r_x)
        xi_reach = h ** (-rho) * (absxi0 + r_xi)
        if x_reach <= margin * 0.5 * grid.length and xi_reach <= margin * grid.nyquist:
            keep.append(h)
    return keep


@dataclass
class DecayFit:
    mu_hat: float
    r2: float
    h_used: list
    norms: list


def _fit_loglog(hs, norms):
    logs = np.log(np.asarray(hs))
    logn = np.log(np.asarray(norms))
    A = np.vstack([logs, np.ones_like(logs)]).T
    coef, *_ = np.linalg.lstsq(A, logn, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((logn - pred) ** 2))
    ss_tot = float(np.sum((logn - np.mean(logn)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), r2


def estimate_decay_order(
    u,
    x0,
    xi0,
    delta,
    rho,
    window=None,
    h_grid=None,
    force_dense=False,
    min_points=3,
):
    """Fit log ||op_h(window) u||_L2 against log h; slope = decay order mu_hat.

    Returns a DecayFit; mu_hat = +inf when every windowed norm sits below the
    numerical floor (rapid decay beyond measurability).
    """
    grid = u.grid
    if window is None:
        window = window_symbol(x0, xi0)
    if h_grid is None:
        h_grid = default_h_grid()
    h_grid = valid_h_grid(grid, x0, xi0, delta, rho, h_grid)
    if len(h_grid) < min_points:
        raise ValueError(
            "fewer than %d usable h values after box/Nyquist truncation" % min_points
        )
    floor = NORM_FLOOR * max(l2_norm(u), 1e-300)
    hs, norms = [], []
    for h in h_grid:
        val = l2_norm(op_quantize(window, u, h, delta, rho, force_dense=force_dense))
        if val > floor:
            hs.append(h)
            norms.append(val)
    if len(hs) < min_points:
        return DecayFit(math.inf, 1.0, list(h_grid), norms)
    mu_hat, r2 = _fit_loglog(hs, norms)
    return DecayFit(mu_hat, r2, hs, norms)


def is_singular_at_order(mu_hat, sigma, tol_order=TOL_ORDER):
    """Membership rule: report 'singular at order sigma' when mu_hat < sigma - tol."""
    return mu_hat < sigma - tol_order


@dataclass
class ProbeSpec:
    x0: float
    xi0: float
    delta: float
    rho: float
    label: str = ""
    r_x: Optional[float] = None
    r_xi: Optional[float] = None


@dataclass
class ProbeResult:
    x0: float
    xi0: float
    delta: float
    rho: float
    mu_hat: float
    r2: float
    label: str = ""
    h_used: list = dc_field(default_factory=list)
    norms: list = dc_field(default_factory=list)


@dataclass
class WavefrontReport:
    """Decay-order estimates over a family of phase-space probes."""

    probes: list
    h_grid: list
    tolerances: dict = dc_field(default_factory=lambda: {"tol_order": TOL_ORDER})
    meta: dict = dc_field(default_factory=dict)

    def by_label(self, label):
        return [p for p in self.probes if p.label == label]

    def mu(self, label):
        hits = self.by_label(label)
        if not hits:
            raise KeyError(f"no probe labelled {label!r}")
        return hits[0].mu_hat

    def min_control_mu(self, control_prefix="control"):
        vals = [p.mu_hat for p in self.probes if p.label.startswith(control_prefix)]
        return min(vals) if vals else math.inf

    def to_dict(self):
        return {
            "probes": [
                {
                    "x0": _jsonify(p.x0),
                    "xi0": _jsonify(p.xi0),
                    "delta": p.delta,
                    "rho": p.rho,
                    "mu_hat": p.mu_hat,
                    "r2": p.r2,
                    "label": p.label,
                    "h_used": list(p.h_used),
                    "norms": list(p.norms),
                }
                for p in self.probes
            ],
            "h_grid": list(self.h_grid),
            "tolerances": dict(self.tolerances),
            "meta": self.meta,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        probes = [
            ProbeResult(
                x0=p["x0"],
                xi0=p["xi0"],
                delta=p["delta"],
                rho=p["rho"],
                mu_hat=p["mu_hat"],
                r2=p["r2"],
                label=p.get("label", ""),
                h_used=list(p.get("h_used", [])),
                norms=list(p.get("norms", [])),
            )
            for p in d["probes"]
        ]
        return cls(probes, list(d["h_grid"]), dict(d.get("tolerances", {})), d.get("meta", {}))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _jsonify(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return [float(c) for c in np.atleast_1d(v)]
    return float(v)


def _max_threads():
    env = os.environ.get("MICROLOC_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def probe_sweep(u, specs, h_grid=None, force_dense=False, meta=None):
    """Run estimate_decay_order over a list of ProbeSpec, optionally threaded."""
    if h_grid is None:
        h_grid = default_h_grid()

    def run(spec):
        window = window_symbol(spec.x0, spec.xi0, r_x=spec.r_x, r_xi=spec.r_xi)
        fit = estimate_decay_order(
            u, spec.x0, spec.xi0, spec.delta, spec.rho,
            window=window, h_grid=h_grid, force_dense=force_dense,
        )
        return ProbeResult(
            x0=spec.x0, xi0=spec.xi0, delta=spec.delta, rho=spec.rho,
            mu_hat=fit.mu_hat, r2=fit.r2, label=spec.label,
            h_used=fit.h_used, norms=fit.norms,
        )

    nthreads = _max_threads()
    if nthreads > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(run, specs))
    else:
        results = [run(s) for s in specs]
    return WavefrontReport(results, list(h_grid), meta=meta or {})
