"""Data containers, seeded randomness and the few linear-algebra kernels the
solver depends on."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "ConvergenceError",
    "HsiImage",
    "Prng",
    "l2_normalize",
    "spectral_norm",
    "matmul",
    "as_matrix",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class DataError(ValueError):
    """Input data violates a documented precondition."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations.

    The best estimate reached so far is kept in ``estimate``.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


def as_matrix(m, name="matrix"):
    """Return ``m`` as a 2-D float64 array (float32 input is widened)."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number) or np.iscomplexobj(arr):
        raise DataError(f"{name} must hold real numbers, got dtype {arr.dtype}")
    return np.asarray(arr, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class HsiImage:
    """An L x N reflectance matrix, one column per pixel.

    ``spatial`` is the optional (H, W) raster shape with pixel index
    ``row * W + col``; ``wavelengths`` the optional band centres in nm.
    ``zero_pixels`` lists the columns found all-zero by :func:`l2_normalize`.
    """

    data: np.ndarray
    spatial: tuple[int, int] | None = None
    wavelengths: tuple[float, ...] | None = None
    zero_pixels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = np.array(as_matrix(self.data, "image data"), dtype=np.float64, copy=True)
        L, N = data.shape
        if L < 1 or N < 1:
            raise DataError(f"image must have at least one band and one pixel, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("image contains non-finite values")
        if np.any(data < 0):
            raise DataError("image contains negative reflectances")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

        if self.spatial is not None:
            H, W = (int(v) for v in self.spatial)
            if H < 1 or W < 1 or H * W != N:
                raise DataError(f"spatial shape {(H, W)} does not match {N} pixels")
            object.__setattr__(self, "spatial", (H, W))
        if self.wavelengths is not None:
            wl = tuple(float(v) for v in self.wavelengths)
            if len(wl) != L:
                raise DataError(f"got {len(wl)} wavelengths for {L} bands")
            object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "zero_pixels", tuple(int(i) for i in self.zero_pixels))

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_cube(cls, cube, wavelengths=None):
        """Build an image from an (H, W, L) band-last cube."""
        cube = np.asarray(cube)
        if cube.ndim != 3:
            raise DataError(f"cube must be 3-D (H, W, L), got shape {cube.shape}")
        H, W, L = cube.shape
        return cls(cube.reshape(H * W, L).T, spatial=(H, W), wavelengths=wavelengths)


def l2_normalize(image: HsiImage) -> HsiImage:
    """Scale every pixel to unit Euclidean norm.

    All-zero pixels are left as zeros and recorded in ``zero_pixels`` of the
    returned image.
    """
    # scale by the column maximum so tiny reflectances do not underflow when squared
    peak = image.data.max(axis=0)
    zero = peak == 0.0
    scaled = image.data / np.where(zero, 1.0, peak)
    norms = peak * np.sqrt(np.einsum("ij,ij->j", scaled, scaled))
    if np.all(zero):
        raise DataError("degenerate input: every pixel is zero")
    scale = np.where(zero, 1.0, norms)
    return HsiImage(
        image.data / scale,
        spatial=image.spatial,
        wavelengths=image.wavelengths,
        zero_pixels=tuple(np.flatnonzero(zero)),
    )


def _splitmix_mix(z):
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Prng:
    """SplitMix64 generator.

    The stream is bit-exact across platforms: each draw adds the golden-ratio
    increment to the state and mixes it; unit variates keep the top 53 bits,
    ``u = (z >> 11) * 2**-53``.
    """

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _splitmix_mix(self.state)

    def next_unit(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def skip(self, n: int) -> None:
        self.state = (self.state + n * _GOLDEN) & _MASK64

    def units(self, n: int) -> np.ndarray:
        """Next ``n`` unit variates as an array, identical to ``n`` calls of
        :meth:`next_unit`."""
        if n <= 0:
            return np.empty(0)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        self.skip(n)
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self) -> float:
        """Standard normal variate (Box-Muller, one value per two draws)."""
        u1 = 1.0 - self.next_unit()
        u2 = self.next_unit()
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))

    def normals(self, n: int) -> np.ndarray:
        u = self.units(2 * n).reshape(n, 2)
        return np.sqrt(-2.0 * np.log(1.0 - u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


def spectral_norm(m, tol: float = 1e-6, max_iters: int = 1000) -> float:
    """Largest singular value of ``m`` by power iteration on ``m.T @ m``.

    Starts from the normalized all-ones vector and stops once the eigen
    residual of the Gram matrix drops below ``tol`` relative to the current
    eigenvalue estimate.
    """
    m = as_matrix(m)
    if not np.all(np.isfinite(m)):
        raise DataError("spectral_norm needs a finite matrix")
    gram = m.T @ m
    v = np.ones(gram.shape[0]) / np.sqrt(gram.shape[0])
    lam = 0.0
    for _ in range(max_iters):
        w = gram @ v
        lam = float(v @ w)
        if lam <= 0.0:
            raise DataError("spectral_norm of a zero matrix")
        if np.linalg.norm(w - lam * v) <= tol * lam:
            return float(np.sqrt(lam))
        v = w / np.linalg.norm(w)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations", float(np.sqrt(max(lam, 0.0)))
    )


def matmul(a, b) -> np.ndarray:
    """Dense float64 product ``a @ b``.

    Backed by BLAS; the ensemble pins BLAS to a single thread so the summation
    order never depends on the worker count.
    """
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise DataError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b
