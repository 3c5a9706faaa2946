"""Phase-space symbols a(x, xi) and the bump-function library.

A Symbol is a pointwise-evaluable function on phase space with declared
growth orders (mu, k), i.e. |a(x, xi)| <= C <x>^k <xi>^mu.  Separable symbols
additionally carry a term list a = sum_m c_m(x) m_m(xi), which quantization
and paradifferential routines exploit.

In 2D, the x and xi arguments are (component, component) tuples; in 1D they
are plain arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "Symbol",
    "smoothstep",
    "smoothstep_prime",
    "plateau_bump",
    "plateau_bump_prime",
    "radial_bump",
    "window_symbol",
    "symbol_product",
    "symbol_sum",
    "symbol_scale",
    "constant_symbol",
    "multiplier_symbol",
    "x_function_symbol",
]


def smoothstep(t):
    """C^inf step: 0 for t <= 0, 1 for t >= 1, strictly increasing between."""
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        fa = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        fb = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return fa / (fa + fb)


def smoothstep_prime(t):
    """Derivative of smoothstep (analytic)."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(t)
    ti = t[inside]
    fa = np.exp(-1.0 / ti)
    fb = np.exp(-1.0 / (1.0 - ti))
    dfa = fa / ti ** 2
    dfb = -fb / (1.0 - ti) ** 2
    denom = fa + fb
    out[inside] = (dfa * denom - fa * (dfa + dfb)) / denom ** 2
    return out


def plateau_bump(r, r_plateau=0.5, r_support=1.0):
    """Radial profile: 1 for r <= r_plateau, 0 for r >= r_support, smooth, decreasing."""
    r = np.abs(np.asarray(r, dtype=float))
    return smoothstep((r_support - r) / (r_support - r_plateau))


def plateau_bump_prime(r, r_plateau=0.5, r_support=1.0):
    r = np.asarray(r, dtype=float)
    sgn = np.sign(r)
    return (
        -sgn
        * smoothstep_prime((r_support - np.abs(r)) / (r_support - r_plateau))
        / (r_support - r_plateau)
    )


def radial_bump(x, r_plateau=0.5, r_support=1.0):
    """|x|-radial plateau bump; accepts scalars, arrays, or component tuples.

    Radial and decreasing, so x . grad phi <= 0 as the escape-symbol lemmas
    require.
    """
    if isinstance(x, (tuple, list)):
        r = np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in x))
    else:
        r = np.abs(np.asarray(x, dtype=float))
    return plateau_bump(r, r_plateau, r_support)


def radial_bump_grad(x, r_plateau=0.5, r_support=1.0):
    """Gradient of radial_bump; returns same structure as x."""
    if isinstance(x, (tuple, list)):
        comps = [np.asarray(c, dtype=float) for c in x]
        r = np.sqrt(sum(c ** 2 for c in comps))
        dr = plateau_bump_prime(r, r_plateau, r_support)
        safe = np.where(r > 0.0, r, 1.0)
        return tuple(dr * c / safe for c in comps)
    x = np.asarray(x, dtype=float)
    r = np.abs(x)
    dr = plateau_bump_prime(r, r_plateau, r_support)
    return dr * np.sign(x)


@dataclass
class Symbol:
    """Phase-space symbol with declared growth orders."""

    func: Callable
    order: Tuple[float, float] = (0.0, 0.0)  # (mu, k): <xi>^mu, <x>^k growth
    separable: Optional[Sequence[Tuple[Callable, Callable]]] = None
    support: Optional[tuple] = None  # ((x_lo, x_hi), (xi_lo, xi_hi)) hint
    label: str = ""

    def __call__(self, x, xi):
        return self.func(x, xi)

    @property
    def mu(self):
        return self.order[0]

    @property
    def k(self):
        return self.order[1]


def constant_symbol(c):
    return Symbol(
        lambda x, xi: c * np.ones(np.broadcast(_first(x), _first(xi)).shape),
        order=(0.0, 0.0),
        separable=[(lambda x: c * np.ones_like(_first(x)), lambda xi: np.ones_like(_first(xi)))],
        label=f"const({c})",
    )


def multiplier_symbol(m, mu=0.0):
    return Symbol(
        lambda x, xi: np.broadcast_to(np.asarray(m(xi)), np.broadcast(_first(x), np.asarray(m(xi))).shape),
        order=(mu, 0.0),
        separable=[(lambda x: np.ones_like(_first(x)), m)],
        label="multiplier",
    )


def x_function_symbol(c, k=0.0):
    return Symbol(
        lambda x, xi: np.broadcast_to(np.asarray(c(x)), np.broadcast(np.asarray(c(x)), _first(xi)).shape),
        order=(0.0, k),
        separable=[(c, lambda xi: np.ones_like(_first(xi)))],
        label="x-function",
    )


def _first(z):
    return np.asarray(z[0]) if isinstance(z, (tuple, list)) else np.asarray(z)


def symbol_product(a, b):
    sep = None
    if a.separable is not None and b.separable is not None:
        sep = [
            (lambda x, ca=ca, cb=cb: np.asarray(ca(x)) * np.asarray(cb(x)),
             lambda xi, ma=ma, mb=mb: np.asarray(ma(xi)) * np.asarray(mb(xi)))
            for (ca, ma) in a.separable
            for (cb, mb) in b.separable
        ]
    return Symbol(
        lambda x, xi: np.asarray(a(x, xi)) * np.asarray(b(x, xi)),
        order=(a.mu + b.mu, a.k + b.k),
        separable=sep,
        label=f"({a.label})*({b.label})",
    )


def symbol_sum(a, b):
    sep = None
    if a.separable is not None and b.separable is not None:
        sep = list(a.separable) + list(b.separable)
    return Symbol(
        lambda x, xi: np.asarray(a(x, xi)) + np.asarray(b(x, xi)),
        order=(max(a.mu, b.mu), max(a.k, b.k)),
        separable=sep,
        label=f"({a.label})+({b.label})",
    )


def symbol_scale(a, c):
    sep = None
    if a.separable is not None:
        sep = [(lambda x, cx=cx: c * np.asarray(cx(x)), m) for (cx, m) in a.separable]
    return Symbol(
        lambda x, xi: c * np.asarray(a(x, xi)),
        order=a.order,
        separable=sep,
        label=f"{c}*({a.label})",
    )


def _dist(z, z0):
    if isinstance(z, (tuple, list)):
        z0 = np.asarray(z0, dtype=float)
        return np.sqrt(sum((np.asarray(c, dtype=float) - z0[i]) ** 2 for i, c in enumerate(z)))
    return np.abs(np.asarray(z, dtype=float) - float(z0))


def window_symbol(x0, xi0, r_x=None, r_xi=None, plateau=0.5):
    """Compactly supported window elliptic at (x0, xi0), value 1 at the center.

    Defaults follow the probing convention: radius 0.25|xi0| in xi and
    0.25 max(|x0|, 1) in x.  Separable single-term product of plateau bumps;
    support is exactly {|x - x0| <= r_x} x {|xi - xi0| <= r_xi}.
    """
    absx0 = float(np.linalg.norm(np.atleast_1d(np.asarray(x0, dtype=float))))
    absxi0 = float(np.linalg.norm(np.atleast_1d(np.asarray(xi0, dtype=float))))
    if r_x is None:
        r_x = 0.25 * max(absx0, 1.0)
    if r_xi is None:
        if absxi0 == 0.0:
            raise ValueError("xi0 = 0 needs an explicit r_xi")
        r_xi = 0.25 * absxi0

    def bx(x):
        return plateau_bump(_dist(x, x0) / r_x, plateau, 1.0)

    def bxi(xi):
        return plateau_bump(_dist(xi, xi0) / r_xi, plateau, 1.0)

    return Symbol(
        lambda x, xi: bx(x) * bxi(xi),
        order=(0.0, 0.0),
        separable=[(bx, bxi)],
        support=((x0, r_x), (xi0, r_xi)),
        label=f"window@({x0},{xi0})",
    )
