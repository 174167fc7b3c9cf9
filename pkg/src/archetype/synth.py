"""Synthetic linear-mixing data ``X = E A + noise``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from archetype.core import HsiImage, Prng

N_BUMPS = 4
# flat continuum level relative to the RMS of the bumps; keeps pairwise
# endmember cosines in the 0.9-0.98 range typical of reflectance spectra
CONTINUUM = 2.0


@dataclass(frozen=True)
class SynthSpec:
    bands: int
    pixels: int
    endmembers: int
    snr_db: float | None = None
    dirichlet_alpha: float = 1.0
    pure_pixels: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.endmembers < 2:
            raise ValueError("need at least 2 endmembers")
        if self.bands < self.endmembers:
            raise ValueError(f"bands ({self.bands}) must be >= endmembers ({self.endmembers})")
        if self.pixels < self.endmembers:
            raise ValueError(f"pixels ({self.pixels}) must be >= endmembers ({self.endmembers})")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not self.dirichlet_alpha > 0:
            raise ValueError("dirichlet_alpha must be positive")


def gamma_variate(rng: Prng, alpha: float) -> float:
    """Gamma(alpha, 1) draw by Marsaglia and Tsang's squeeze method."""
    if alpha < 1.0:
        # boost: G(a) = G(a + 1) * U^(1/a)
        g = gamma_variate(rng, alpha + 1.0)
        return g * rng.next_unit() ** (1.0 / alpha)
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.next_unit()
        if u < 1.0 - 0.0331 * x**4:
            return d * v
        if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def dirichlet_column(rng: Prng, p: int, alpha: float) -> np.ndarray:
    """Symmetric Dirichlet(alpha) point of the p-simplex."""
    if p < 1 or not alpha > 0:
        raise ValueError(f"invalid Dirichlet parameters p={p}, alpha={alpha}")
    if p == 1:
        return np.ones(1)
    g = np.array([gamma_variate(rng, alpha) for _ in range(p)])
    total = g.sum()
    if total == 0.0:
        # every variate underflowed (tiny alpha); fall back to a vertex
        g[0], total = 1.0, 1.0
    return g / total


def smooth_spectra(rng: Prng, bands: int, p: int) -> np.ndarray:
    """p unit-norm spectra, each a flat continuum plus Gaussian bumps over the
    band axis."""
    grid = np.linspace(0.0, 1.0, bands)
    E = np.zeros((bands, p))
    for k in range(p):
        u = rng.units(3 * N_BUMPS).reshape(N_BUMPS, 3)
        centers = u[:, 0]
        widths = 0.03 + 0.15 * u[:, 1]
        heights = 0.1 + 0.9 * u[:, 2]
        for c, w, h in zip(centers, widths, heights):
            E[:, k] += h * np.exp(-0.5 * ((grid - c) / w) ** 2)
        E[:, k] += CONTINUUM * np.linalg.norm(E[:, k]) / np.sqrt(bands)
    return E / np.linalg.norm(E, axis=0)


def generate(spec: SynthSpec):
    """Return ``(image, E, A)``.

    With ``pure_pixels`` the first p pixels are exactly the endmembers. Noise
    is Gaussian, scaled to the requested SNR before clamping at zero.
    """
    rng = Prng(spec.seed)
    L, N, p = spec.bands, spec.pixels, spec.endmembers
    E = smooth_spectra(rng, L, p)
    A = np.empty((p, N))
    for i in range(N):
        A[:, i] = dirichlet_column(rng, p, spec.dirichlet_alpha)
    if spec.pure_pixels:
        A[:, :p] = np.eye(p)
    X = E @ A
    if spec.snr_db is not None:
        noise = rng.normals(L * N).reshape(L, N)
        signal_power = np.sum(X**2)
        noise *= np.sqrt(signal_power / (np.sum(noise**2) * 10.0 ** (spec.snr_db / 10.0)))
        X = np.maximum(X + noise, 0.0)
    return HsiImage(X), E, A
