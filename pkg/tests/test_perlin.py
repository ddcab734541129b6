import numpy as np
import pytest

from hdflow.fields import curl, curl2d, divergence, gradient
from hdflow.perlin import (PerlinSpec, octave_seed, perlin_eval, perlin_layer,
                           split_seed, turbulence)


class TestPerlinLayer:
    def test_deterministic(self):
        a = perlin_layer(3, 12345, 64, 64)
        b = perlin_layer(3, 12345, 64, 64)
        assert np.array_equal(a.data, b.data)
        c = perlin_layer(3, 12346, 64, 64)
        assert not np.array_equal(a.data, c.data)

    def test_zero_at_lattice_nodes(self):
        n, size = 3, 64
        field = perlin_layer(n, 99, size, size)
        stride = size // 2 ** n
        assert np.allclose(field.data[::stride, ::stride], 0.0, atol=1e-15)

    def test_amplitude_bounded_over_many_seeds(self):
        worst = max(np.max(np.abs(perlin_layer(3, seed, 32, 32).data))
                    for seed in range(1000))
        assert worst <= 1.0

    def test_lattice_finer_than_grid_rejected(self):
        with pytest.raises(ValueError, match="finer"):
            perlin_layer(6, 0, 32, 32)

    def test_periodic_continuation(self):
        # the underlying noise has period `cells` in lattice units
        rng = np.random.default_rng(0)
        xx = rng.uniform(0, 8, size=(16, 16))
        yy = rng.uniform(0, 8, size=(16, 16))
        base = perlin_eval(xx, yy, 8, 7)
        assert np.allclose(perlin_eval(xx + 8, yy, 8, 7), base, atol=1e-12)
        assert np.allclose(perlin_eval(xx, yy + 8, 8, 7), base, atol=1e-12)

    def test_grid_operators_wrap_seamlessly(self):
        # compare stencil outputs at the seam against a double-resolution
        # evaluation of the same continuous noise: no discontinuity spike
        field = perlin_layer(2, 5, 64, 64)
        g = gradient(field)
        seam = np.abs(g.u[:, 0])
        interior = np.abs(g.u[:, 1:-1]).max()
        assert seam.max() < 4 * max(interior, 1.0)


class TestTurbulence:
    def test_single_octave_equals_scaled_layer(self):
        spec = PerlinSpec(2, 2, 42, 32, 32)
        t = turbulence(spec)
        layer = perlin_layer(2, octave_seed(42, 2), 32, 32)
        assert np.allclose(t.data, layer.data / 4.0, atol=1e-15)

    def test_two_octave_amplitude_bound(self):
        t = turbulence(PerlinSpec(2, 3, 7, 64, 64))
        assert np.max(np.abs(t.data)) <= 1 / 4 + 1 / 8

    def test_amplitude_law_general(self):
        for seed in range(20):
            t = turbulence(PerlinSpec(1, 5, seed, 64, 64))
            assert np.max(np.abs(t.data)) <= sum(2.0 ** -n for n in range(1, 6))

    def test_band_limited_spectrum(self):
        t = turbulence(PerlinSpec(1, 5, 3, 256, 256))
        spectrum = np.abs(np.fft.fft2(t.data)) ** 2
        kx = np.fft.fftfreq(256) * 256
        ky = np.fft.fftfreq(256) * 256
        radius = np.hypot(kx[None, :], ky[:, None])
        total = spectrum.sum()
        high = spectrum[radius > 2 ** 5 * 2].sum()
        assert high < 0.01 * total

    def test_deterministic(self):
        spec = PerlinSpec(1, 4, 123, 48, 48)
        assert np.array_equal(turbulence(spec).data, turbulence(spec).data)

    def test_invalid_octave_range_rejected(self):
        with pytest.raises(ValueError):
            PerlinSpec(0, 3, 0, 64, 64)
        with pytest.raises(ValueError):
            PerlinSpec(3, 2, 0, 64, 64)
        with pytest.raises(ValueError):
            PerlinSpec(1, 7, 0, 64, 64)


def test_octave_seed_rule():
    assert octave_seed(0, 1) == 0x9E3779B97F4A7C15
    assert octave_seed(5, 0) == 5


def test_split_seed_decorrelates_indices():
    seeds = {split_seed(1234, i) for i in range(100)}
    assert len(seeds) == 100
