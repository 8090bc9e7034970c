"""Test problems: parallel-beam CT, Gaussian Toeplitz blur, phantoms and noise.

All images are returned as column-major vectors (see :mod:`edgemg.operators`).
Pixel ``(r, c)`` of an ``n x n`` image covers the unit cell with lower-left
corner ``(c - n/2, n/2 - r - 1)``: row 0 is the top of the image and the image
is centred on the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import sparse
from .sparse import SparseMatrix

__all__ = [
    "TomoGeometry",
    "BlurSpec",
    "Problem",
    "full_angle_geometry",
    "limited_angle_geometry",
    "shepp_logan",
    "grains_like",
    "tomo_matrix",
    "blur_kernel",
    "blur_matrix",
    "add_noise",
    "make_problem",
    "to_image",
    "from_image",
    "PROBLEM_KINDS",
]

PROBLEM_KINDS = ("tomo_full", "tomo_limited", "blur")


def to_image(x, n_v, n_h=None):
    """Column-major vector -> ``(n_v, n_h)`` array."""
    n_h = n_v if n_h is None else n_h
    return np.asarray(x).reshape((n_v, n_h), order="F")


def from_image(img):
    return np.asarray(img, dtype=np.float64).ravel(order="F")


def _pixel_centres(n):
    # normalized [-1, 1] coordinates, y pointing up
    c = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    x = np.broadcast_to(c[None, :], (n, n))
    y = np.broadcast_to(-c[:, None], (n, n))
    return x, y


# intensity, semi-axis x, semi-axis y, centre x, centre y, rotation (deg)
_SHEPP_LOGAN = np.array(
    [
        [2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0],
        [-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0],
        [-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0],
        [-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0],
        [0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0],
        [0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0],
        [0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0],
        [0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0],
        [0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0],
        [0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0],
    ]
)

_MODIFIED_INTENSITIES = np.array([1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1])


def shepp_logan(n: int, variant: str = "classic") -> np.ndarray:
    """Sum-of-ellipses Shepp-Logan head phantom sampled at pixel centres.

    ``variant="classic"`` uses the original intensities (values in ``[0, 2]``);
    ``"modified"`` uses the higher-contrast intensities (values in ``[0, 1]``).
    """
    if n < 16:
        raise ValueError("shepp_logan needs n >= 16")
    params = _SHEPP_LOGAN.copy()
    if variant == "modified":
        params[:, 0] = _MODIFIED_INTENSITIES
    elif variant != "classic":
        raise ValueError(f"unknown Shepp-Logan variant {variant!r}")
    x, y = _pixel_centres(n)
    img = np.zeros((n, n))
    for val, a, b, x0, y0, phi in params:
        t = np.deg2rad(phi)
        dx, dy = x - x0, y - y0
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += val
    return from_image(img)


GRAINS_PALETTE = (0.2, 0.4, 0.6, 0.8, 1.0)


def grains_like(n: int, seed: int = 0) -> np.ndarray:
    """Piecewise-constant Voronoi image with ``n // 4`` cells and palette values."""
    if n < 16:
        raise ValueError("grains_like needs n >= 16")
    rng = np.random.default_rng(seed)
    n_cells = max(4, n // 4)
    centres = rng.uniform(0, n, size=(n_cells, 2))
    values = rng.choice(np.asarray(GRAINS_PALETTE), size=n_cells)
    rr, cc = np.meshgrid(np.arange(n) + 0.5, np.arange(n) + 0.5, indexing="ij")
    d2 = (rr[..., None] - centres[:, 0]) ** 2 + (cc[..., None] - centres[:, 1]) ** 2
    return from_image(values[np.argmin(d2, axis=-1)])


# -- tomography ---------------------------------------------------------------


@dataclass(frozen=True)
class TomoGeometry:
    n: int
    angles: tuple
    detector_count: int | None = None
    detector_spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.detector_count is None:
            object.__setattr__(self, "detector_count", self.n)
        if not self.angles:
            raise ValueError("at least one projection angle is required")
        if any(a < 0 or a >= 180 for a in self.angles):
            raise ValueError("angles must lie in [0, 180)")
        if self.detector_count < self.n:
            raise ValueError("detector_count must be at least n")

    @property
    def n_rays(self):
        return len(self.angles) * self.detector_count


def full_angle_geometry(n: int) -> TomoGeometry:
    return TomoGeometry(n, tuple(range(0, 180)))


def limited_angle_geometry(n: int) -> TomoGeometry:
    return TomoGeometry(n, tuple(range(0, 131, 2)))


_AXIS_EPS = 1e-12


def _trace_ray(p0, d, n):
    """Siddon traversal of one line through the ``n x n`` grid.

    Returns (pixel indices, intersection lengths).
    """
    half = n / 2.0
    s_lo, s_hi = -np.inf, np.inf
    crossings = []
    grid = np.arange(n + 1) - half
    for ax in (0, 1):
        if abs(d[ax]) < _AXIS_EPS:
            if not -half < p0[ax] < half:
                return None
            continue
        s1 = (-half - p0[ax]) / d[ax]
        s2 = (half - p0[ax]) / d[ax]
        s_lo = max(s_lo, min(s1, s2))
        s_hi = min(s_hi, max(s1, s2))
        crossings.append((grid - p0[ax]) / d[ax])
    if not s_hi > s_lo:
        return None
    s = np.concatenate([[s_lo, s_hi], *crossings])
    s = np.unique(s[(s >= s_lo) & (s <= s_hi)])
    lengths = np.diff(s)
    mids = 0.5 * (s[:-1] + s[1:])
    keep = lengths > 1e-12
    lengths, mids = lengths[keep], mids[keep]
    px = p0[0] + mids * d[0]
    py = p0[1] + mids * d[1]
    col = np.clip(np.floor(px + half).astype(np.int64), 0, n - 1)
    row = np.clip(np.floor(half - py).astype(np.int64), 0, n - 1)
    return row + col * n, lengths


def tomo_matrix(g: TomoGeometry) -> SparseMatrix:
    """Parallel-beam system matrix with exact ray/pixel intersection lengths.

    Rows are ordered angle-major: ``row = angle_index * detector_count + k``.
    At angle ``theta`` detector ``k`` sits at offset ``t_k`` along
    ``(cos theta, sin theta)`` and its ray runs along ``(-sin theta, cos theta)``;
    at 0 degrees the rays are vertical and detector ``k`` sees image column ``k``.
    """
    n, nd = g.n, g.detector_count
    offsets = (np.arange(nd) - (nd - 1) / 2.0) * g.detector_spacing
    indptr = [0]
    indices, data = [], []
    for theta in np.deg2rad(g.angles):
        c, s = np.cos(theta), np.sin(theta)
        d = np.array([-s, c])
        for t in offsets:
            hit = _trace_ray(np.array([t * c, t * s]), d, n)
            if hit is not None:
                order = np.argsort(hit[0])
                indices.append(hit[0][order])
                data.append(hit[1][order])
                indptr.append(indptr[-1] + len(order))
            else:
                indptr.append(indptr[-1])
    idx = np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64)
    val = np.concatenate(data) if data else np.zeros(0)
    return SparseMatrix(g.n_rays, n * n, np.asarray(indptr), idx, val)


# -- deblurring ---------------------------------------------------------------


@dataclass(frozen=True)
class BlurSpec:
    """Separable Gaussian blur of an ``m x n`` image (``m`` rows, ``n`` columns)."""

    n: int
    m: int | None = None
    band1: int = 8
    band2: int = 7
    sigma1: float | None = None
    sigma2: float | None = None

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", self.n)
        if self.sigma1 is None:
            object.__setattr__(self, "sigma1", 1.5 * self.n / 64)
        if self.sigma2 is None:
            object.__setattr__(self, "sigma2", 1.25 * self.n / 64)
        if self.band1 < 1 or self.band2 < 1:
            raise ValueError("band widths must be at least 1")
        if self.band1 > self.n or self.band2 > self.m:
            raise ValueError("band width exceeds image dimension")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("sigmas must be positive")


def blur_kernel(length: int, band: int, sigma: float) -> np.ndarray:
    """First column of the symmetric Toeplitz blur, normalized by ``2*sum - 1``."""
    z = np.zeros(length)
    k = np.arange(band)
    z[:band] = np.exp(-(k**2) / (2.0 * sigma**2))
    return z / (2.0 * z.sum() - 1.0)


def blur_matrix(spec: BlurSpec) -> SparseMatrix:
    """``kron(A1, A2)`` with ``A1`` blurring along rows (width n), ``A2`` along columns."""
    z1 = blur_kernel(spec.n, spec.band1, spec.sigma1)
    z2 = blur_kernel(spec.m, spec.band2, spec.sigma2)
    A1 = sparse.from_scipy(sp.csr_matrix(scipy.linalg.toeplitz(z1)))
    A2 = sparse.from_scipy(sp.csr_matrix(scipy.linalg.toeplitz(z2)))
    return sparse.kron(A1, A2)


# -- noise and assembled problems ---------------------------------------------


def add_noise(b_true, level: float, seed: int = 0) -> np.ndarray:
    """Add white Gaussian noise with ``||noise|| = level * ||b_true||`` exactly."""
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    b_true = np.asarray(b_true, dtype=np.float64)
    if level == 0:
        return b_true.copy()
    eta = np.random.default_rng(seed).standard_normal(b_true.shape)
    eta *= level * np.linalg.norm(b_true) / np.linalg.norm(eta)
    return b_true + eta


@dataclass
class Problem:
    A: SparseMatrix
    b: np.ndarray
    b_true: np.ndarray
    x_true: np.ndarray
    n_v: int
    n_h: int
    kind: str = "custom"
    noise: float = 0.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def descriptor(self):
        return {
            "kind": self.kind,
            "n": self.n_v,
            "n_v": self.n_v,
            "n_h": self.n_h,
            "noise": self.noise,
            "seed": self.seed,
            "shape_A": [self.A.n_rows, self.A.n_cols],
            "vectorization": "column-major",
            **self.extra,
        }


def make_problem(kind: str, n: int, noise: float = 0.01, seed: int = 0, phantom: str | None = None) -> Problem:
    """Assemble one of the standard test problems.

    ``tomo_full`` uses the Shepp-Logan phantom with angles 0..179,
    ``tomo_limited`` a grains-like phantom with angles 0:2:130, and ``blur`` a
    blurred grains-like phantom.  ``phantom`` overrides the default choice
    (``"shepp_logan"``, ``"shepp_logan_modified"`` or ``"grains"``).
    """
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {kind!r}; expected one of {PROBLEM_KINDS}")
    if phantom is None:
        phantom = "shepp_logan" if kind == "tomo_full" else "grains"
    if phantom == "shepp_logan":
        x_true = shepp_logan(n)
    elif phantom == "shepp_logan_modified":
        x_true = shepp_logan(n, "modified")
    elif phantom == "grains":
        x_true = grains_like(n, seed)
    else:
        raise ValueError(f"unknown phantom {phantom!r}")

    if kind == "tomo_full":
        geom = full_angle_geometry(n)
        A = tomo_matrix(geom)
        extra = {"angles": "0:1:179", "detectors": geom.detector_count}
    elif kind == "tomo_limited":
        geom = limited_angle_geometry(n)
        A = tomo_matrix(geom)
        extra = {"angles": "0:2:130", "detectors": geom.detector_count}
    else:
        spec = BlurSpec(n)
        A = blur_matrix(spec)
        extra = {"band1": spec.band1, "band2": spec.band2, "sigma1": spec.sigma1, "sigma2": spec.sigma2}
    extra["phantom"] = phantom
    b_true = sparse.matvec(A, x_true)
    b = add_noise(b_true, noise, seed)
    return Problem(A, b, b_true, x_true, n, n, kind, noise, seed, extra)
