"""Operators in hybrid coordinates (r, varphi, z).

x = sqrt(r^2 - z^2) cos(varphi), y = sqrt(r^2 - z^2) sin(varphi), z = z.
The expressions are symbolic (sympy); numeric callables come from lambdify.
They are used to certify the radial channel reductions of the hydrogen
corrections rather than in any time loop.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

__all__ = [
    "r",
    "z",
    "varphi",
    "hybrid_laplacian",
    "hybrid_grad_dot",
    "hybrid_generator",
    "radial_channel_operator",
    "channel_reduction",
    "laplacian_vs_cartesian",
]

r, varphi = sp.symbols("r varphi", positive=True)
z = sp.Symbol("z", real=True)


def hybrid_laplacian(f):
    return (sp.diff(f, r, 2) + 2 / r * sp.diff(f, r) + 2 * z / r * sp.diff(f, r, z)
            + sp.diff(f, z, 2) + sp.diff(f, varphi, 2) / (r**2 - z**2))


def hybrid_grad_dot(f, g):
    fr, fz, fp = (sp.diff(f, v) for v in (r, z, varphi))
    gr, gz, gp = (sp.diff(g, v) for v in (r, z, varphi))
    return fr * gr + z / r * (fr * gz + fz * gr) + fz * gz + fp * gp / (r**2 - z**2)


def hybrid_generator(f, phi0=r):
    """-1/2 (Laplacian - 2 grad(phi0).grad) f, with psi0 = exp(-phi0).

    The default phi0 = r is the hydrogen ground state up to a constant.
    """
    return -sp.Rational(1, 2) * (hybrid_laplacian(f) - 2 * hybrid_grad_dot(phi0, f))


def radial_channel_operator(u, ell: int):
    """-1/2 u'' + (-1/r + l(l+1)/(2 r^2) + 1/2) u."""
    return (-sp.diff(u, r, 2) / 2
            + (-1 / r + sp.Rational(ell * (ell + 1), 2) / r**2 + sp.Rational(1, 2)) * u)


def channel_reduction(order: int):
    """Residuals of the channel factorisations (all should simplify to 0).

    order 1: L[z e^r p / r^2] = (z e^r / r^2) H_1 p.
    order 2: L[(e^r / r)(p + (z/r)^2 q)] = (e^r / r)[H_0 p - q/r^2 + (z/r)^2 H_2 q].
    """
    p = sp.Function("p")(r)
    if order == 1:
        pre = z * sp.exp(r) / r**2
        res = hybrid_generator(pre * p) / pre - radial_channel_operator(p, 1)
        return [sp.simplify(res)]
    if order == 2:
        q = sp.Function("q")(r)
        pre = sp.exp(r) / r
        expr = sp.expand(sp.simplify(hybrid_generator(pre * (p + z**2 / r**2 * q)) / pre))
        s_part = expr.coeff(z, 0)
        d_part = expr.coeff(z, 2) * r**2
        return [sp.simplify(s_part - radial_channel_operator(p, 0) + q / r**2),
                sp.simplify(d_part - radial_channel_operator(q, 2))]
    raise ValueError("channel reductions are assembled for orders 1 and 2 only")


def laplacian_vs_cartesian(f_radial, points) -> float:
    """max |hybrid Laplacian - Cartesian Laplacian| of f(r) at Cartesian points.

    ``f_radial`` is a sympy expression in ``r``; ``points`` is (n, 3).
    """
    X, Y, Z = sp.symbols("X Y Z", real=True)
    R = sp.sqrt(X**2 + Y**2 + Z**2)
    fc = f_radial.subs(r, R)
    cart = sp.lambdify((X, Y, Z), sp.diff(fc, X, 2) + sp.diff(fc, Y, 2) + sp.diff(fc, Z, 2), "numpy")
    hyb = sp.lambdify((r, z), hybrid_laplacian(f_radial), "numpy")
    pts = np.asarray(points, float)
    rr = np.linalg.norm(pts, axis=1)
    a = np.asarray(cart(pts[:, 0], pts[:, 1], pts[:, 2]), float)
    b = np.broadcast_to(np.asarray(hyb(rr, pts[:, 2]), float), a.shape)
    return float(np.max(np.abs(a - b)))
