"""Wigner matrices, rotations and pointwise spin-weighted spherical harmonics.

Conventions (Condon-Shortley phase throughout):

* ``d^l_{m,n}(beta)`` is the standard real Wigner small-d matrix, so that
  ``d^1_{1,0}(beta) = -sin(beta)/sqrt(2)``.
* ``D^l_{m,n}(alpha, beta, gamma) = exp(-i m alpha) d^l_{m,n}(beta) exp(-i n gamma)``
  with ZYZ Euler angles; the rotation acts on points as ``Rz(alpha) Ry(beta) Rz(gamma)``.
* ``sY^l_m(theta, phi) = (-1)^s sqrt((2l+1)/4pi) exp(i m phi) d^l_{m,-s}(theta)``.

Matrices are indexed ``[m + l, n + l]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import backend
from .errors import DegreeOutOfRangeError, IndexOutOfRangeError

TWO_PI = 2.0 * np.pi


def _packed_offset(l: int) -> int:
    return l * (2 * l - 1) * (2 * l + 1) // 3


class DeltaTable:
    """Immutable table of ``Delta^l_{k,m} = d^l_{k,m}(pi/2)`` for ``l <= l_max``."""

    def __init__(self, l_max: int, packed: np.ndarray):
        if packed.shape != (_packed_offset(l_max + 1),):
            raise ValueError("packed array does not match l_max")
        packed = np.array(packed, dtype=np.float64)
        packed.setflags(write=False)
        self.l_max = int(l_max)
        self._packed = packed

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    def __getitem__(self, l: int) -> np.ndarray:
        """Read-only ``(2l+1, 2l+1)`` block indexed ``[k + l, m + l]``."""
        l = int(l)
        if not 0 <= l <= self.l_max:
            raise DegreeOutOfRangeError(f"degree {l} outside table range [0, {self.l_max}]")
        o = _packed_offset(l)
        n = 2 * l + 1
        return self._packed[o:o + n * n].reshape(n, n)

    def value(self, l: int, k: int, m: int) -> float:
        if abs(k) > l or abs(m) > l:
            raise IndexOutOfRangeError(f"|k|, |m| must be <= l (got l={l}, k={k}, m={m})")
        return float(self[l][k + l, m + l])

    def dense(self) -> np.ndarray:
        """All degrees in one zero-padded ``(l_max+1, 2l_max+1, 2l_max+1)`` array."""
        L = self.l_max
        out = np.zeros((L + 1, 2 * L + 1, 2 * L + 1))
        for l in range(L + 1):
            out[l, L - l:L + l + 1, L - l:L + l + 1] = self[l]
        return out

    def with_fault(self, l: int, k: int, m: int) -> "DeltaTable":
        """Copy with one entry's sign flipped. Used only for fault-injection checks."""
        packed = self._packed.copy()
        packed[_packed_offset(l) + (k + l) * (2 * l + 1) + (m + l)] *= -1.0
        return DeltaTable(self.l_max, packed)

    def __repr__(self) -> str:
        return f"DeltaTable(l_max={self.l_max})"


def compute_delta_table(l_max: int) -> DeltaTable:
    """Build the table with the stable three-term degree recursion.

    The recursion is seeded at ``l = 0`` and the boundary rows ``|k| = l`` come
    from a one-step product recursion, so no factorials appear and degrees well
    past 128 stay at round-off accuracy.
    """
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    return DeltaTable(l_max, backend.kernels().delta_packed(int(l_max)))


@lru_cache(maxsize=8)
def shared_delta_table(l_max: int) -> DeltaTable:
    """Process-wide cached table; safe to share since tables are immutable."""
    return compute_delta_table(l_max)


@dataclass(frozen=True)
class Rotation:
    """ZYZ Euler angles, reduced to alpha, gamma in [0, 2pi) and beta in [0, pi]."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        a, b, g = float(self.alpha), float(self.beta), float(self.gamma)
        b = np.mod(b, TWO_PI)
        if b > np.pi:
            # Rz(a) Ry(b) Rz(g) == Rz(a + pi) Ry(2pi - b) Rz(g + pi)
            b = TWO_PI - b
            a += np.pi
            g += np.pi
        object.__setattr__(self, "alpha", float(np.mod(a, TWO_PI)))
        object.__setattr__(self, "beta", float(b))
        object.__setattr__(self, "gamma", float(np.mod(g, TWO_PI)))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, R) -> "Rotation":
        R = np.asarray(R, dtype=float)
        beta = float(np.arctan2(np.hypot(R[0, 2], R[1, 2]), R[2, 2]))
        # the upper 2x2 block gives (1 + cos b) e^{i(a+c)} and -(1 - cos b) e^{i(a-c)};
        # each sum is well conditioned exactly where the matrix depends on it
        plus = np.arctan2(R[1, 0] - R[0, 1], R[0, 0] + R[1, 1])
        minus = np.arctan2(-(R[1, 0] + R[0, 1]), R[1, 1] - R[0, 0])
        alpha, gamma = (plus + minus) / 2, (plus - minus) / 2
        # halving leaves a joint ambiguity of pi, i.e. the sign of beta; fix it from column z
        if R[0, 2] * np.cos(alpha) + R[1, 2] * np.sin(alpha) < 0:
            alpha, gamma = alpha + np.pi, gamma + np.pi
        return cls(alpha, beta, gamma)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        """Haar-uniform rotation from a unit quaternion with Gaussian components."""
        q = rng.standard_normal(4)
        w, x, y, z = q / np.linalg.norm(q)
        R = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])
        return cls.from_matrix(R)

    def as_matrix(self) -> np.ndarray:
        return _rz(self.alpha) @ _ry(self.beta) @ _rz(self.gamma)

    def inverse(self) -> "Rotation":
        return Rotation.from_matrix(self.as_matrix().T)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation.from_matrix(self.as_matrix() @ other.as_matrix())

    def apply(self, theta, phi):
        """Image of the sphere points (theta, phi) under this rotation."""
        x = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        y = np.tensordot(self.as_matrix(), x, axes=1)
        return np.arccos(np.clip(y[2], -1.0, 1.0)), np.mod(np.arctan2(y[1], y[0]), TWO_PI)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _check_degree(table: DeltaTable, l: int):
    if l < 0 or l > table.l_max:
        raise DegreeOutOfRangeError(f"degree {l} outside table range [0, {table.l_max}]")


def _i_power(n):
    """i**n for integer arrays, exact."""
    return np.array([1, 1j, -1, -1j])[np.mod(n, 4)]


def wigner_d(table: DeltaTable, l: int, theta: float) -> np.ndarray:
    """Real Wigner small-d matrix from the Delta factorisation.

    ``d^l_{m,n}(theta) = i^{m-n} sum_k Delta^l_{k,m} exp(-i k theta) Delta^l_{k,n}``
    """
    _check_degree(table, l)
    delta = table[l]
    k = np.arange(-l, l + 1)
    full = delta.T @ (np.exp(-1j * k * theta)[:, None] * delta)
    full = full * _i_power(k[:, None] - k[None, :])
    resid = np.abs(full.imag).max()
    assert resid <= 1e-12 * max(1.0, float(l)), f"non-real Wigner d residue {resid}"
    return full.real


def wigner_D(table: DeltaTable, l: int, g: Rotation) -> np.ndarray:
    _check_degree(table, l)
    m = np.arange(-l, l + 1)
    d = wigner_d(table, l, g.beta)
    return np.exp(-1j * m * g.alpha)[:, None] * d * np.exp(-1j * m * g.gamma)[None, :]


def swsh_eval(table: DeltaTable, s: int, l: int, m: int, theta, phi):
    """Spin-weighted spherical harmonic ``sY^l_m`` at (theta, phi); broadcasts over arrays."""
    if l < 0 or abs(s) > l or abs(m) > l:
        raise IndexOutOfRangeError(f"need |s|, |m| <= l (got s={s}, l={l}, m={m})")
    _check_degree(table, l)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    delta = table[l]
    k = np.arange(-l, l + 1)
    weights = delta[:, m + l] * delta[:, -s + l]
    # d^l_{m,-s}(theta) = i^{m+s} sum_k Delta_{k,m} Delta_{k,-s} exp(-ik theta)
    phase = np.exp(-1j * np.multiply.outer(theta, k))
    d = (_i_power(m + s) * (phase @ weights)).real
    norm = (-1) ** (s % 2) * np.sqrt((2 * l + 1) / (4 * np.pi))
    return norm * np.exp(1j * m * phi) * d
