"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and output layouts; used when the extension is not built or
when ``SPINCONV_PURE_PYTHON`` is set.
"""
import numpy as np


def _offset(l):
    return l * (2 * l - 1) * (2 * l + 1) // 3


def delta_packed(l_max):
    """Delta^l_{k,m} = d^l_{k,m}(pi/2) for 0 <= l <= l_max, packed degree by degree."""
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    out = np.zeros(_offset(l_max + 1))
    out[0] = 1.0
    prev2 = None
    prev = np.ones((1, 1))
    for l in range(1, l_max + 1):
        d = np.zeros((2 * l + 1, 2 * l + 1))
        lp = l - 1
        k = np.arange(-lp, lp + 1, dtype=float)[:, None]
        m = np.arange(-lp, lp + 1, dtype=float)[None, :]
        den = np.sqrt((l * l - k * k) * (l * l - m * m))
        if l >= 2:
            inner = -(2 * l - 1) * k * m / (lp * den) * prev
            older = np.zeros_like(prev)
            older[1:-1, 1:-1] = prev2
            b = l * np.sqrt(np.clip((lp * lp - k * k) * (lp * lp - m * m), 0, None)) / (lp * den)
            d[1:-1, 1:-1] = inner - b * older
        ns = np.arange(-lp, lp + 1, dtype=float)
        d[-1, 1:-1] = -0.5 * np.sqrt(2 * l * (2 * l - 1) / ((l + ns) * (l - ns))) * prev[-1, :]
        d[-1, -1] = d[-1, 0] = 2.0 ** -l
        ks = np.arange(-l, l + 1)
        d[:, -1] = np.where((ks - l) % 2 == 0, 1.0, -1.0) * d[-1, :]
        d[0, :] = d[::-1, -1]
        d[:, 0] = d[-1, ::-1]
        o = _offset(l)
        out[o:o + d.size] = d.ravel()
        prev2, prev = prev, d
    return out


def _triangle_mask(B, spin):
    l = np.arange(B)[:, None]
    m = np.abs(np.arange(-(B - 1), B))[None, :]
    return (l >= m) & (l >= abs(spin))


def contract_forward(plan, tori, spin):
    """out[c, l, m] = sum_k plan[l, m, k] * tori[c, m, k]."""
    B = plan.shape[0]
    a = np.transpose(plan, (1, 0, 2))  # (M, B, K)
    x = np.transpose(tori, (1, 2, 0))  # (M, K, C)
    out = (a @ x.real) + 1j * (a @ x.imag)  # (M, B, C)
    out = np.transpose(out, (2, 1, 0))
    return np.ascontiguousarray(out * _triangle_mask(B, spin))


def contract_inverse(plan, coeffs, spin):
    """out[c, m, k] = sum_l plan[l, m, k] * coeffs[c, l, m]."""
    B = plan.shape[0]
    coeffs = coeffs * _triangle_mask(B, spin)
    a = np.transpose(plan, (1, 2, 0))  # (M, K, B)
    x = np.transpose(coeffs, (2, 1, 0))  # (M, B, C)
    out = (a @ x.real) + 1j * (a @ x.imag)  # (M, K, C)
    return np.ascontiguousarray(np.transpose(out, (2, 0, 1)))
