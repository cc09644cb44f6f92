"""Slow independent reference implementations used by checks and tests.

Wigner d comes from the explicit factorial sum, Wigner D from matrix
exponentials of angular momentum generators, scalar harmonics from scipy, and
transforms from direct summation. Only :func:`direct_synthesis` reuses the
package's pointwise harmonic evaluation.
"""
from __future__ import annotations

from math import comb, factorial

import numpy as np
from scipy.linalg import expm
from scipy.special import sph_harm_y

from .harmonics import swsh_eval
from .transform import SphericalGrid, quadrature_weights


def wigner_d_factorial(l: int, m: int, n: int, beta: float) -> float:
    """``d^l_{m,n}(beta)`` by the explicit sum over k (Condon-Shortley phase)."""
    pre = float(factorial(l + m) * factorial(l - m) * factorial(l + n) * factorial(l - n)) ** 0.5
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    total = 0.0
    for k in range(max(0, n - m), min(l + n, l - m) + 1):
        den = factorial(l + n - k) * factorial(k) * factorial(m - n + k) * factorial(l - m - k)
        total += (-1) ** (m - n + k) * c ** (2 * l + n - m - 2 * k) * s ** (m - n + 2 * k) / den
    return pre * total


def wigner_d_matrix_factorial(l: int, beta: float) -> np.ndarray:
    ms = range(-l, l + 1)
    return np.array([[wigner_d_factorial(l, m, n, beta) for n in ms] for m in ms])


def angular_momentum(l: int) -> tuple[np.ndarray, np.ndarray]:
    """``J_y`` and ``J_z`` in the basis ``|l, m>``, m = -l..l."""
    m = np.arange(-l, l + 1, dtype=float)
    jz = np.diag(m)
    up = np.sqrt(l * (l + 1) - m[:-1] * (m[:-1] + 1))
    jp = np.diag(up, -1)  # J+ |m> = up |m+1>
    jy = (jp - jp.T) / 2j
    return jy, jz


def wigner_D_expm(l: int, alpha: float, beta: float, gamma: float) -> np.ndarray:
    """``exp(-i alpha J_z) exp(-i beta J_y) exp(-i gamma J_z)``."""
    jy, jz = angular_momentum(l)
    return expm(-1j * alpha * jz) @ expm(-1j * beta * jy) @ expm(-1j * gamma * jz)


def ylm_scipy(l: int, m: int, theta, phi):
    """Scalar spherical harmonic with the Condon-Shortley phase."""
    return sph_harm_y(l, m, theta, phi)


def swsh_spin_raising(l: int, s: int, m: int, theta, phi, h: float = 1e-5):
    """Spin-1 harmonic from the scalar one, ``1Y = (l(l+1))^{-1/2} eth Y`` by finite differences.

    Only used as a loose cross-check of the spin-1 sign convention.
    """
    if s != 1:
        raise ValueError("only s = 1 is supported")
    y = lambda t, p: ylm_scipy(l, m, t, p)
    # on spin 0: eth f = -(d_theta + i / sin(theta) d_phi) f
    dth = (y(theta + h, phi) - y(theta - h, phi)) / (2 * h)
    dph = 1j * m * y(theta, phi)
    eth = -(dth + 1j / np.sin(theta) * dph)
    return eth / np.sqrt(l * (l + 1))


def direct_forward_s0(samples: np.ndarray, bandwidth: int) -> np.ndarray:
    """Scalar coefficients by direct quadrature against scipy harmonics; O(B^4)."""
    B = bandwidth
    theta, phi = SphericalGrid(B).mesh()
    ring = quadrature_weights(B).ring[:, None]
    out = np.zeros((B, 2 * B - 1), dtype=complex)
    for l in range(B):
        for m in range(-l, l + 1):
            out[l, m + B - 1] = np.sum(ring * samples * np.conj(ylm_scipy(l, m, theta, phi)))
    return out


def direct_synthesis(coeffs: np.ndarray, spin: int, theta, phi, table) -> np.ndarray:
    """Evaluate a spin-s expansion at arbitrary points by summing harmonics."""
    B = coeffs.shape[-2]
    out = np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
    for l in range(abs(spin), B):
        for m in range(-l, l + 1):
            c = coeffs[l, m + B - 1]
            if c != 0:
                out += c * swsh_eval(table, spin, l, m, theta, phi)
    return out


def linear_interp_oracle(anchors, bandwidth: int) -> np.ndarray:
    """Piecewise-linear curve through anchors spaced evenly on [0, B-1], by hand."""
    anchors = list(anchors)
    n = len(anchors)
    if n == 1:
        return np.full(bandwidth, anchors[0], dtype=complex)
    out = []
    for l in range(bandwidth):
        t = l * (n - 1) / (bandwidth - 1)
        j = min(int(t), n - 2)
        u = t - j
        out.append((1 - u) * anchors[j] + u * anchors[j + 1])
    return np.array(out)


def binomial_delta_edge(l: int, m: int) -> float:
    """``Delta^l_{l,m} = 2^-l sqrt(C(2l, l+m))`` up to the sign ``(-1)^(l-m)``."""
    return (-1) ** (l - m) * 2.0 ** (-l) * comb(2 * l, l + m) ** 0.5
