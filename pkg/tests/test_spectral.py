import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinconv.errors import BandwidthMismatchError, SpinSetError
from spinconv.harmonics import Rotation, shared_delta_table, swsh_eval
from spinconv.oracles import direct_synthesis
from spinconv.spectral import (SPATIAL, SPECTRAL, FeatureMap, FilterSpectrum, bandlimit, filter_from_coeffs,
                               rotate_coeffs, rotate_feature_map, sphere_conv, sphere_corr, spin_conv, spin_corr)
from spinconv.transform import SpinCoeffs, SphericalGrid, get_plan, quadrature_weights, random_coeffs

seeds = st.integers(0, 2**32 - 1)


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def feature(rng, B, spins, channels):
    return FeatureMap({s: random_coeffs(rng, B, s, (channels,)) for s in spins}, B, SPECTRAL)


def spectrum(rng, B, spins_out, spins_in, out_ch, in_ch):
    shape = (out_ch, in_ch, len(spins_out), len(spins_in), B)
    return FilterSpectrum(rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
                          spins_out, spins_in).enforce_support()


def test_rotate_identity_and_z_rotation():
    B = 8
    c = random_coeffs(np.random.default_rng(0), B, 1)
    np.testing.assert_allclose(rotate_coeffs(c, Rotation()), c, atol=1e-15)
    a = 0.9
    n = np.arange(-(B - 1), B)
    np.testing.assert_allclose(rotate_coeffs(c, Rotation(a, 0, 0)), c * np.exp(1j * n * a), atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_rotate_inverse_and_unitarity(seed):
    rng = np.random.default_rng(seed)
    B = 10
    c = SpinCoeffs(random_coeffs(rng, B, -1, (2,)), -1)
    g = Rotation.random(rng)
    r = rotate_coeffs(c, g)
    assert isinstance(r, SpinCoeffs) and r.spin == -1
    np.testing.assert_allclose(np.sum(np.abs(r.coeffs) ** 2, -1), np.sum(np.abs(c.coeffs) ** 2, -1), rtol=1e-10)
    assert rel(rotate_coeffs(r, g.inverse()).coeffs, c.coeffs) <= 1e-10


def test_rotated_coefficients_synthesize_rotated_scalar():
    """x -> f(g x): evaluating the rotated expansion at x equals f at the rotated point."""
    B = 6
    table = shared_delta_table(B - 1)
    rng = np.random.default_rng(2)
    c = random_coeffs(rng, B, 0)
    g = Rotation(0.4, 1.1, 2.0)
    theta = rng.uniform(0.1, 3.0, 25)
    phi = rng.uniform(0, 2 * np.pi, 25)
    gt, gp = g.apply(theta, phi)
    lhs = direct_synthesis(rotate_coeffs(c, g), 0, theta, phi, table)
    np.testing.assert_allclose(lhs, direct_synthesis(c, 0, gt, gp, table), atol=1e-10)


def test_spin_conv_identity_filter():
    B = 8
    F = feature(np.random.default_rng(0), B, (0,), 1)
    K = FilterSpectrum(np.ones((1, 1, 1, 1, B)), (0,), (0,))
    out = spin_conv(F, K)
    assert out.spins == (0,)
    np.testing.assert_allclose(out[0], F[0], atol=0)


def test_spin_conv_scalar_reduces_to_spherical_convolution():
    B = 12
    rng = np.random.default_rng(1)
    f = random_coeffs(rng, B, 0)
    k = random_coeffs(rng, B, 0)
    l = np.arange(B)
    K = FilterSpectrum(k[None, None, None, None, :, B - 1], (0,), (0,))
    out = spin_conv(FeatureMap({0: f[None]}, B, SPECTRAL), K)[0][0]
    scale = 2 * np.pi * np.sqrt(4 * np.pi / (2 * l + 1))
    np.testing.assert_allclose(sphere_conv(f, k), out * scale[:, None], rtol=1e-12, atol=1e-12)


def test_spin_corr_scalar_reduces_to_spherical_correlation():
    B = 12
    rng = np.random.default_rng(2)
    f = random_coeffs(rng, B, 0)
    k = random_coeffs(rng, B, 0)
    K = filter_from_coeffs(FeatureMap({0: k[None, None]}, B, SPECTRAL), (0,))
    out = spin_corr(FeatureMap({0: f[None]}, B, SPECTRAL), K, (0,))[0][0]
    np.testing.assert_allclose(out, sphere_corr(f, k)[..., B - 1], atol=1e-12)


@pytest.mark.parametrize("op", ["conv", "corr"])
@pytest.mark.parametrize("B,spins", [(8, (0, 1)), (16, (0, 1)), (8, (-1, 0, 2))])
def test_equivariance(op, B, spins):
    rng = np.random.default_rng(B + len(spins))
    for _ in range(3):
        F = feature(rng, B, spins, 2)
        K = spectrum(rng, B, spins, spins, 3, 2)
        g = Rotation.random(rng)
        fn = spin_conv if op == "conv" else spin_corr
        a = fn(rotate_feature_map(F, g), K)
        b = rotate_feature_map(fn(F, K), g)
        for s in a.spins:
            assert rel(a[s], b[s]) <= 1e-10


@settings(max_examples=10, deadline=None)
@given(seed=seeds, a=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_linearity(seed, a):
    rng = np.random.default_rng(seed)
    B = 6
    F1, F2 = feature(rng, B, (0, 1), 2), feature(rng, B, (0, 1), 2)
    K = spectrum(rng, B, (0, 1), (0, 1), 2, 2)
    combo = FeatureMap({s: a * F1[s] + F2[s] for s in F1.spins}, B, SPECTRAL)
    for fn in (spin_conv, spin_corr):
        lhs, r1, r2 = fn(combo, K), fn(F1, K), fn(F2, K)
        for s in lhs.spins:
            np.testing.assert_allclose(lhs[s], a * r1[s] + r2[s], atol=1e-12 * (1 + abs(a)) * np.abs(r1[s]).max())


def test_spin_conv_sums_only_shared_spins():
    B = 6
    rng = np.random.default_rng(3)
    F = feature(rng, B, (0, 1), 1)
    K = spectrum(rng, B, (1,), (1, 2), 1, 1)
    only = spin_conv(FeatureMap({1: F[1]}, B, SPECTRAL), K)
    np.testing.assert_allclose(spin_conv(F, K)[1], only[1])
    with pytest.raises(SpinSetError):
        spin_conv(FeatureMap({0: F[0]}, B, SPECTRAL), K)


def test_spin_corr_zero_filter_order_gives_zero_output():
    B = 6
    rng = np.random.default_rng(4)
    F = feature(rng, B, (0, 1), 1)
    K = spectrum(rng, B, (0, 1), (0, 1), 1, 1)
    K.coeffs[:, :, 1] = 0
    out = spin_corr(F, K)
    assert np.all(out[1] == 0) and np.abs(out[0]).max() > 0


def test_spin_corr_output_spin_errors():
    B = 4
    rng = np.random.default_rng(5)
    F = feature(rng, B, (0,), 1)
    K = spectrum(rng, B, (0, 1), (0,), 1, 1)
    with pytest.raises(SpinSetError):
        spin_corr(F, K, (5,))
    with pytest.raises(SpinSetError):
        spin_corr(F, K, (2,))


def test_compatibility_errors():
    rng = np.random.default_rng(6)
    F = feature(rng, 8, (0,), 2)
    with pytest.raises(BandwidthMismatchError):
        spin_conv(F, spectrum(rng, 6, (0,), (0,), 1, 2))
    with pytest.raises(BandwidthMismatchError):
        spin_conv(F, spectrum(rng, 8, (0,), (0,), 1, 3))
    with pytest.raises(ValueError):
        spin_conv(F.to_spatial(), spectrum(rng, 8, (0,), (0,), 1, 2))


def test_feature_map_validation():
    with pytest.raises(SpinSetError):
        FeatureMap({}, 4)
    with pytest.raises(SpinSetError):
        FeatureMap({4: np.zeros((1, 8, 8))}, 4)
    with pytest.raises(BandwidthMismatchError):
        FeatureMap({0: np.zeros((1, 8, 8)), 1: np.zeros((2, 8, 8))}, 4)
    with pytest.raises(BandwidthMismatchError):
        FeatureMap({0: np.zeros((1, 4, 7))}, 4, SPATIAL)
    F = FeatureMap({1: np.zeros((2, 8, 8)), 0: np.zeros((2, 8, 8))}, 4)
    assert F.spins == (0, 1) and F.channels == 2


def test_feature_map_domain_round_trip():
    B = 8
    F = feature(np.random.default_rng(7), B, (0, 1), 2)
    back = F.to_spatial().to_spectral()
    for s in F.spins:
        assert rel(back[s], F[s]) <= 1e-12


def test_filter_support_zeroed():
    K = spectrum(np.random.default_rng(8), 6, (0, 2), (-1, 1), 1, 1)
    assert np.all(K.component(2, 1)[..., :2] == 0)
    assert np.all(K.component(0, -1)[..., :1] == 0)
    assert np.all(K.component(0, -1)[..., 1:] != 0)


def test_bandlimit():
    B = 8
    c = SpinCoeffs(random_coeffs(np.random.default_rng(9), B, 1), 1)
    np.testing.assert_array_equal(bandlimit(c, B).coeffs, c.coeffs)
    small = bandlimit(c, 5)
    assert small.coeffs.shape == (5, 9)
    assert np.sum(np.abs(small.coeffs) ** 2) <= np.sum(np.abs(c.coeffs) ** 2)
    delta = np.zeros((B, 2 * B - 1), complex)
    delta[5, B - 1 + 2] = 1
    assert np.all(bandlimit(SpinCoeffs(delta, 0), 5).coeffs == 0)
    assert small.at(3, -2) == c.at(3, -2)
    with pytest.raises(SpinSetError):
        bandlimit(c, 1)
    with pytest.raises(BandwidthMismatchError):
        bandlimit(c, 9)


def test_conv_maps_scalar_harmonic_to_spin_harmonic():
    B = 8
    table = shared_delta_table(B - 1)
    theta, phi = SphericalGrid(B).mesh()
    y = swsh_eval(table, 0, 3, 2, theta, phi)
    F = FeatureMap({0: y[None]}, B).to_spectral()
    k = np.zeros((1, 1, 1, 1, B), complex)
    k[..., 3] = 1
    out = spin_conv(F, FilterSpectrum(k, (1,), (0,))).to_spatial()[1][0]
    expected = swsh_eval(table, 1, 3, 2, theta, phi)
    np.testing.assert_allclose(out, expected, atol=1e-12)
    assert quadrature_weights(B).integrate(np.abs(out) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert get_plan(B).forward(out, 1)[3, B - 1 + 2] == pytest.approx(1.0, abs=1e-12)
