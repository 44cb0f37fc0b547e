"""Steady density profiles rho(x3) and their classification.

A profile is unstable-stratified ("rt_unstable") when the derivative is
positive somewhere, "uniformly_unstable" when it is positive everywhere,
"stable" when negative everywhere, "indeterminate" otherwise.  Positivity
of rho itself is enforced at construction.

Tabulated profiles come from a small binary file (see docs/FORMATS.md)
and are evaluated through a monotone cubic interpolant; the derivative is
the interpolant's, never a finite difference of the samples.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import StaggeredGrid
from .kernels import cells_to_faces_mean

RT_UNSTABLE = "rt_unstable"
UNIFORMLY_UNSTABLE = "uniformly_unstable"
STABLE = "stable"
INDETERMINATE = "indeterminate"

_SAMPLES = 4097


class ProfileError(ValueError):
    pass


class ProfileFormatError(ProfileError):
    """Malformed tabulated-profile file; `offset` is the failing byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass
class DensityProfile:
    kind: str
    params: tuple
    rho: Callable[[np.ndarray], np.ndarray]
    drho: Callable[[np.ndarray], np.ndarray]
    d2rho: Callable[[np.ndarray], np.ndarray] | None = None
    spec: str = field(default="")

    def classify(self, height: float) -> str:
        x = np.linspace(0.0, height, _SAMPLES)
        r = np.asarray(self.rho(x), dtype=float)
        d = np.asarray(self.drho(x), dtype=float)
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(d)):
            raise ProfileError(f"profile {self.spec or self.kind} is not finite on [0, {height}]")
        if r.min() <= 0.0:
            raise ProfileError(f"profile {self.spec or self.kind} must be positive; min={r.min():g}")
        if d.min() > 0.0:
            return UNIFORMLY_UNSTABLE
        if d.max() > 0.0:
            return RT_UNSTABLE
        if d.max() < 0.0:
            return STABLE
        return INDETERMINATE


def linear_profile(a: float, b: float) -> DensityProfile:
    """rho = a + b*x3."""
    return DensityProfile(
        "linear", (a, b),
        rho=lambda x: a + b * np.asarray(x, dtype=float),
        drho=lambda x: np.full_like(np.asarray(x, dtype=float), float(b)),
        d2rho=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        spec=f"linear({a:g},{b:g})",
    )


def exponential_profile(a: float, b: float) -> DensityProfile:
    """rho = a*exp(b*x3)."""
    return DensityProfile(
        "exponential", (a, b),
        rho=lambda x: a * np.exp(b * np.asarray(x, dtype=float)),
        drho=lambda x: a * b * np.exp(b * np.asarray(x, dtype=float)),
        d2rho=lambda x: a * b * b * np.exp(b * np.asarray(x, dtype=float)),
        spec=f"exponential({a:g},{b:g})",
    )


def tanh_profile(a: float, b: float, c: float, w: float) -> DensityProfile:
    """rho = a + b*tanh((x3 - c)/w), a sharp or smooth interface at x3 = c."""
    if w == 0:
        raise ProfileError("tanh profile needs nonzero width w")

    def rho(x):
        return a + b * np.tanh((np.asarray(x, dtype=float) - c) / w)

    def drho(x):
        t = np.tanh((np.asarray(x, dtype=float) - c) / w)
        return (b / w) * (1.0 - t * t)

    def d2rho(x):
        t = np.tanh((np.asarray(x, dtype=float) - c) / w)
        return (-2.0 * b / (w * w)) * t * (1.0 - t * t)

    return DensityProfile("tanh", (a, b, c, w), rho, drho, d2rho,
                          spec=f"tanh({a:g},{b:g},{c:g},{w:g})")


TABLE_MAGIC = b"RTSPROF1"


def write_tabulated(path, x: np.ndarray, rho: np.ndarray) -> None:
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    with open(path, "wb") as f:
        f.write(TABLE_MAGIC)
        f.write(struct.pack("<I", len(x)))
        np.stack([x, rho], axis=1).astype("<f8").tofile(f)


def tabulated_profile(path) -> DensityProfile:
    """Load (x, rho) samples from a binary table and interpolate.

    Layout: 8-byte magic "RTSPROF1", little-endian uint32 sample count,
    then count records of two little-endian float64 (x ascending, rho).
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8 or raw[:8] != TABLE_MAGIC:
        raise ProfileFormatError(f"bad magic in {path}, expected {TABLE_MAGIC!r}", 0)
    if len(raw) < 12:
        raise ProfileFormatError(f"truncated header in {path}", len(raw))
    (count,) = struct.unpack_from("<I", raw, 8)
    if count < 4:
        raise ProfileFormatError(f"need at least 4 samples, got {count}", 8)
    need = 12 + 16 * count
    if len(raw) != need:
        off = min(len(raw), need)
        raise ProfileFormatError(
            f"payload length mismatch in {path}: have {len(raw)} bytes, need {need}", off)
    data = np.frombuffer(raw, dtype="<f8", offset=12).reshape(count, 2)
    x, r = data[:, 0].copy(), data[:, 1].copy()
    for i in range(count):
        if not np.isfinite(x[i]) or not np.isfinite(r[i]):
            raise ProfileFormatError(f"non-finite sample {i}", 12 + 16 * i)
        if r[i] <= 0.0:
            raise ProfileFormatError(f"nonpositive density sample {i}: {r[i]:g}", 12 + 16 * i + 8)
        if i > 0 and x[i] <= x[i - 1]:
            raise ProfileFormatError(
                f"abscissae not strictly increasing at sample {i}", 12 + 16 * i)
    interp = PchipInterpolator(x, r)
    dinterp = interp.derivative()
    d2interp = interp.derivative(2)
    return DensityProfile(
        "tabulated", (str(path),),
        rho=lambda t: interp(np.asarray(t, dtype=float)),
        drho=lambda t: dinterp(np.asarray(t, dtype=float)),
        d2rho=lambda t: d2interp(np.asarray(t, dtype=float)),
        spec=f"tabulated({path})",
    )


_REGISTRY = {
    "linear": (linear_profile, 2),
    "exponential": (exponential_profile, 2),
    "tanh": (tanh_profile, 4),
    "tabulated": (tabulated_profile, 1),
}


def parse_profile(spec: str) -> DensityProfile:
    """Parse a registry string such as "linear(1,1)" or "tabulated(rho.dat)"."""
    s = spec.strip()
    if not s.endswith(")") or "(" not in s:
        raise ProfileError(f"profile spec {spec!r} must look like kind(arg,...)")
    kind, _, rest = s[:-1].partition("(")
    kind = kind.strip()
    if kind not in _REGISTRY:
        raise ProfileError(f"unknown profile kind {kind!r}; known: {sorted(_REGISTRY)}")
    factory, nargs = _REGISTRY[kind]
    parts = [p.strip() for p in rest.split(",")] if rest.strip() else []
    if len(parts) != nargs:
        raise ProfileError(f"profile {kind} takes {nargs} argument(s), got {len(parts)}")
    if kind == "tabulated":
        return factory(parts[0])
    try:
        args = [float(p) for p in parts]
    except ValueError as e:
        raise ProfileError(f"non-numeric argument in {spec!r}: {e}") from None
    return factory(*args)


# ---------------------------------------------------------------------------
# grid sampling
# ---------------------------------------------------------------------------

def rho_cells(grid: StaggeredGrid, profile: DensityProfile) -> np.ndarray:
    return np.ascontiguousarray(
        np.broadcast_to(profile.rho(grid.cell_height()), grid.cells))


def drho_cells(grid: StaggeredGrid, profile: DensityProfile) -> np.ndarray:
    return np.ascontiguousarray(
        np.broadcast_to(profile.drho(grid.cell_height()), grid.cells))


def rho_faces_flat(grid: StaggeredGrid, profile: DensityProfile) -> np.ndarray:
    """Density on every face, flattened in component order.

    Vertical faces take the mean of the adjacent cell values so that the
    face quadrature is the exact transpose of the cell quadrature used by
    the buoyancy operators; other faces sit at cell height and are
    evaluated pointwise.
    """
    g = grid.gravity_axis
    rc = rho_cells(grid, profile)
    parts = []
    for i in range(grid.dim):
        if i == g:
            parts.append(cells_to_faces_mean(rc, g).ravel())
        else:
            parts.append(np.ascontiguousarray(
                np.broadcast_to(profile.rho(grid.face_height(i)),
                                grid.comp_shape(i))).ravel())
    return np.concatenate(parts)
