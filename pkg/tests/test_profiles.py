"""Density profiles: parsing, classification, tabulated file format."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtspectra.profiles import (INDETERMINATE, RT_UNSTABLE, STABLE,
                                TABLE_MAGIC, UNIFORMLY_UNSTABLE,
                                ProfileError, ProfileFormatError,
                                exponential_profile, linear_profile,
                                parse_profile, tabulated_profile,
                                tanh_profile, write_tabulated)


class TestParsing:
    def test_linear(self):
        p = parse_profile("linear(1,1)")
        x = np.linspace(0, 1, 5)
        assert np.allclose(p.rho(x), 1 + x)
        assert np.allclose(p.drho(x), 1.0)

    def test_exponential(self):
        p = parse_profile("exponential(2,0.5)")
        x = np.linspace(0, 1, 5)
        assert np.allclose(p.rho(x), 2 * np.exp(0.5 * x))

    def test_tanh(self):
        p = parse_profile("tanh(1,0.5,0.5,0.1)")
        assert np.isclose(p.rho(np.array([0.5]))[0], 1.0)

    def test_whitespace_and_negatives(self):
        p = parse_profile("linear( 2 , -1 )")
        assert np.allclose(p.rho(np.array([1.0])), 1.0)

    def test_unknown_kind(self):
        with pytest.raises(ProfileError):
            parse_profile("quartic(1,2)")

    def test_malformed(self):
        with pytest.raises(ProfileError):
            parse_profile("linear(1")


class TestClassification:
    def test_uniformly_unstable(self):
        assert linear_profile(1, 1).classify(1.0) == UNIFORMLY_UNSTABLE
        assert exponential_profile(1, 1).classify(1.0) == UNIFORMLY_UNSTABLE

    def test_stable(self):
        assert linear_profile(2, -1).classify(1.0) == STABLE

    def test_rt_unstable_mixed_sign(self):
        x = np.linspace(0, 1, 200)
        rho = 2.0 + 0.3 * np.sin(2 * np.pi * x)
        p = _table_profile(x, rho)
        assert p.classify(1.0) == RT_UNSTABLE

    def test_indeterminate_flat(self):
        x = np.linspace(0, 1, 50)
        p = _table_profile(x, np.full_like(x, 1.5))
        assert p.classify(1.0) == INDETERMINATE

    def test_nonpositive_density_rejected(self):
        with pytest.raises(ProfileError):
            linear_profile(1, -2).classify(1.0)

    @given(st.floats(0.1, 5.0), st.floats(0.01, 3.0))
    @settings(max_examples=30, deadline=None)
    def test_positive_slope_always_uniform(self, a, b):
        assert linear_profile(a, b).classify(1.0) == UNIFORMLY_UNSTABLE


def _table_profile(x, rho, tmpdir=None):
    import tempfile
    import os
    fd, path = tempfile.mkstemp(suffix=".rtsprof")
    os.close(fd)
    write_tabulated(path, x, rho)
    p = tabulated_profile(path)
    os.unlink(path)
    return p


class TestTabulatedFormat:
    def test_round_trip(self, tmp_path):
        x = np.linspace(0, 1, 33)
        rho = 1 + x ** 2
        path = tmp_path / "p.rtsprof"
        write_tabulated(path, x, rho)
        p = tabulated_profile(path)
        xs = np.linspace(0, 1, 97)
        assert np.max(np.abs(p.rho(xs) - (1 + xs ** 2))) < 5e-4

    def test_monotone_interpolation(self, tmp_path):
        """The interpolant of increasing data has nonnegative slope."""
        x = np.linspace(0, 1, 17)
        rho = 1 + np.sqrt(x)
        path = tmp_path / "p.rtsprof"
        write_tabulated(path, x, rho)
        p = tabulated_profile(path)
        xs = np.linspace(0, 1, 301)
        assert np.all(p.drho(xs) >= -1e-12)

    def test_bad_magic_offset(self, tmp_path):
        path = tmp_path / "bad.rtsprof"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 40)
        with pytest.raises(ProfileFormatError) as ei:
            tabulated_profile(path)
        assert ei.value.offset == 0

    def test_truncated_payload_offset(self, tmp_path):
        x = np.linspace(0, 1, 8)
        path = tmp_path / "t.rtsprof"
        write_tabulated(path, x, 1 + x)
        raw = path.read_bytes()
        path.write_bytes(raw[:-9])
        with pytest.raises(ProfileFormatError) as ei:
            tabulated_profile(path)
        assert ei.value.offset >= len(TABLE_MAGIC)

    def test_too_few_points(self, tmp_path):
        path = tmp_path / "few.rtsprof"
        payload = struct.pack("<2d", 0.0, 1.0) + struct.pack("<2d", 1.0, 2.0)
        path.write_bytes(TABLE_MAGIC + struct.pack("<I", 2) + payload)
        with pytest.raises(ProfileFormatError):
            tabulated_profile(path)

    def test_non_increasing_x(self, tmp_path):
        x = np.array([0.0, 0.5, 0.4, 1.0])
        path = tmp_path / "dec.rtsprof"
        payload = b"".join(struct.pack("<2d", xi, 1.0 + xi) for xi in x)
        path.write_bytes(TABLE_MAGIC + struct.pack("<I", 4) + payload)
        with pytest.raises(ProfileFormatError) as ei:
            tabulated_profile(path)
        assert ei.value.offset > 0

    def test_non_finite_value(self, tmp_path):
        x = np.array([0.0, 0.3, 0.6, 1.0])
        rho = np.array([1.0, np.nan, 1.5, 2.0])
        path = tmp_path / "nan.rtsprof"
        payload = b"".join(struct.pack("<2d", xi, ri)
                           for xi, ri in zip(x, rho))
        path.write_bytes(TABLE_MAGIC + struct.pack("<I", 4) + payload)
        with pytest.raises(ProfileFormatError):
            tabulated_profile(path)

    def test_nonpositive_density(self, tmp_path):
        x = np.array([0.0, 0.3, 0.6, 1.0])
        rho = np.array([1.0, -0.5, 1.5, 2.0])
        path = tmp_path / "neg.rtsprof"
        payload = b"".join(struct.pack("<2d", xi, ri)
                           for xi, ri in zip(x, rho))
        path.write_bytes(TABLE_MAGIC + struct.pack("<I", 4) + payload)
        with pytest.raises(ProfileFormatError):
            tabulated_profile(path)


class TestDerivativeConsistency:
    @pytest.mark.parametrize("spec", ["linear(1,1)", "exponential(1.5,0.8)",
                                      "tanh(1,0.6,0.5,0.15)"])
    def test_drho_matches_finite_difference(self, spec):
        p = parse_profile(spec)
        x = np.linspace(0.05, 0.95, 19)
        h = 1e-6
        fd = (p.rho(x + h) - p.rho(x - h)) / (2 * h)
        assert np.max(np.abs(p.drho(x) - fd)) < 1e-7 * max(1, np.max(np.abs(fd)))
