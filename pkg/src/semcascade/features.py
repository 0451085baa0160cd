"""Color and texture decomposition of RGB images.

Two feature families feed the first-stage classifiers:

* color: per-pixel HSV bucket membership, average-pooled onto a small grid;
* texture: rectified responses of one even-phase Gabor filter, pooled the
  same way and scaled by the largest response the kernel can produce on a
  [0, 1] grayscale image (the sum of its positive taps).

Every descriptor also carries a preprocessing cost in MAC-equivalents, taken
from the cost constants on :class:`FeatureConfig`.
"""
from __future__ import annotations

import colorsys
import enum
import functools
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Union

import numpy as np
from scipy.signal import convolve2d

from .errors import InvalidParamsError, InvalidSpecError, ShapeError
from .kvconfig import as_float, as_float_list, as_int, read_kv

SQRT2 = math.sqrt(2.0)
LUMA = np.array([0.299, 0.587, 0.114])
RESPONSE_EPS = 1e-6


class Color(enum.Enum):
    RED = "red"
    ORANGE = "orange"
    YELLOW = "yellow"
    GREEN = "green"
    CYAN = "cyan"
    BLUE = "blue"
    PURPLE = "purple"
    MAGENTA = "magenta"
    WHITE = "white"
    BLACK = "black"

    @property
    def code(self) -> int:
        return _COLOR_ORDER.index(self)

    @property
    def chromatic(self) -> bool:
        return self not in (Color.WHITE, Color.BLACK)


_COLOR_ORDER = list(Color)
CHROMATIC = _COLOR_ORDER[:8]


def parse_color(name) -> Color:
    if isinstance(name, Color):
        return name
    try:
        return Color(str(name).strip().lower())
    except ValueError as exc:
        raise InvalidSpecError(f"unknown color {name!r}") from exc


@dataclass(frozen=True)
class FeatureConfig:
    """Feature-bank configuration.

    ``hue_boundaries`` holds the lower edge of each chromatic bucket in
    :data:`CHROMATIC` order; bucket ``i`` spans ``[b[i], b[i+1])`` going
    around the hue circle, so any cyclically increasing list partitions
    ``[0, 360)``.
    """

    hue_boundaries: tuple = (337.5, 22.5, 67.5, 112.5, 157.5, 202.5, 247.5, 292.5)
    white_s_max: float = 0.2
    white_v_min: float = 0.8
    black_v_max: float = 0.2
    gabor_scales: tuple = (4.0, 8.0, 16.0, 32.0, 64.0)  # multiples of sqrt(2)
    gabor_orientations: tuple = (0.0, 45.0, 90.0, 135.0)
    gabor_reference_size: int = 256
    gabor_sigma_ratio: float = 0.56
    gabor_gamma: float = 0.5
    grid: int = 8
    cost_hsv_convert: int = 3
    cost_bucket_test: int = 1
    cost_pool: int = 1

    def __post_init__(self):
        b = tuple(float(x) for x in self.hue_boundaries)
        object.__setattr__(self, "hue_boundaries", b)
        object.__setattr__(self, "gabor_scales", tuple(float(x) for x in self.gabor_scales))
        object.__setattr__(
            self, "gabor_orientations", tuple(float(x) for x in self.gabor_orientations)
        )
        if len(b) != 8:
            raise InvalidSpecError("hue_boundaries needs exactly 8 entries")
        offsets = [(x - b[0]) % 360.0 for x in b]
        if any(o2 <= o1 for o1, o2 in zip(offsets, offsets[1:])):
            raise InvalidSpecError("hue_boundaries must increase around the hue circle")
        if self.grid < 1:
            raise InvalidSpecError("grid must be positive")

    @property
    def hue_offsets(self) -> np.ndarray:
        return np.array([(x - self.hue_boundaries[0]) % 360.0 for x in self.hue_boundaries])

    @property
    def cost_hsv(self) -> int:
        """Per-pixel cost of the conversion plus one bucket test."""
        return self.cost_hsv_convert + self.cost_bucket_test

    def hue_range(self, color: Color) -> tuple[float, float]:
        if not color.chromatic:
            raise InvalidParamsError(f"{color.value} has no hue range")
        i = color.code
        return self.hue_boundaries[i], self.hue_boundaries[(i + 1) % 8]

    def bucket_center(self, color: Color) -> float:
        lo, hi = self.hue_range(color)
        width = (hi - lo) % 360.0
        return (lo + width / 2.0) % 360.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def from_kv(cls, kv: dict) -> "FeatureConfig":
        out = {}
        for f in fields(cls):
            if f.name not in kv:
                continue
            raw = kv[f.name]
            if f.name in ("hue_boundaries", "gabor_scales", "gabor_orientations"):
                out[f.name] = tuple(as_float_list(raw))
            elif f.type == "int":
                out[f.name] = as_int(raw, f.name)
            else:
                out[f.name] = as_float(raw, f.name)
        return cls(**out)

    @classmethod
    def from_file(cls, path) -> "FeatureConfig":
        return cls.from_kv(read_kv(path))


DEFAULT_CONFIG = FeatureConfig()


# --------------------------------------------------------------------- color


def rgb_to_hsv(pixel) -> tuple[float, float, float]:
    """Hexcone HSV of an 8-bit RGB triple; hue in degrees, 0 when grey."""
    r, g, b = (float(c) / 255.0 for c in pixel)
    mx, mn = max(r, g, b), min(r, g, b)
    v = mx
    if mx == 0.0:
        return 0.0, 0.0, 0.0
    s = (mx - mn) / mx
    if s == 0.0:
        return 0.0, 0.0, v
    d = mx - mn
    if mx == r:
        h = ((g - b) / d) % 6.0
    elif mx == g:
        h = (b - r) / d + 2.0
    else:
        h = (r - g) / d + 4.0
    return (60.0 * h) % 360.0, s, v


def rgb_to_hsv_array(pixels: np.ndarray) -> np.ndarray:
    """Vectorised :func:`rgb_to_hsv` over an ``(..., 3)`` array."""
    rgb = np.asarray(pixels, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    d = mx - mn
    safe_d = np.where(d > 0, d, 1.0)
    h = np.zeros_like(mx)
    rmax = (mx == r) & (d > 0)
    gmax = (mx == g) & (d > 0) & ~rmax
    bmax = (d > 0) & ~rmax & ~gmax
    h[rmax] = np.mod((g - b)[rmax] / safe_d[rmax], 6.0)
    h[gmax] = (b - r)[gmax] / safe_d[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / safe_d[bmax] + 4.0
    h = np.mod(60.0 * h, 360.0)
    s = np.where(mx > 0, d / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


def hue_bucket(h: float, s: float, v: float, config: FeatureConfig = DEFAULT_CONFIG) -> Color:
    if s < config.white_s_max and v > config.white_v_min:
        return Color.WHITE
    if v < config.black_v_max:
        return Color.BLACK
    shifted = (h - config.hue_boundaries[0]) % 360.0
    idx = int(np.searchsorted(config.hue_offsets, shifted, side="right")) - 1
    return CHROMATIC[idx]


def bucket_codes(hsv: np.ndarray, config: FeatureConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Integer :attr:`Color.code` per pixel of an ``(..., 3)`` HSV array."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    shifted = np.mod(h - config.hue_boundaries[0], 360.0)
    codes = np.searchsorted(config.hue_offsets, shifted, side="right") - 1
    codes = np.where(v < config.black_v_max, Color.BLACK.code, codes)
    codes = np.where((s < config.white_s_max) & (v > config.white_v_min), Color.WHITE.code, codes)
    return codes.astype(np.int8)


def color_rgb(color: Color, value: float = 0.9, config: FeatureConfig = DEFAULT_CONFIG):
    """Canonical 8-bit RGB for a bucket, rendered at its hue-range centre."""
    if color is Color.WHITE:
        return (242, 242, 242)
    if color is Color.BLACK:
        return (20, 20, 20)
    r, g, b = colorsys.hsv_to_rgb(config.bucket_center(color) / 360.0, 1.0, value)
    return tuple(int(round(c * 255)) for c in (r, g, b))


# ------------------------------------------------------------------- texture


@dataclass(frozen=True)
class GaborParams:
    wavelength: float
    orientation: float
    sigma: float
    gamma: float
    kernel_size: int

    def __post_init__(self):
        if not self.wavelength > 0:
            raise InvalidParamsError("wavelength must be positive")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise InvalidParamsError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        object.__setattr__(self, "orientation", float(self.orientation) % 180.0)

    @classmethod
    def from_wavelength(
        cls, wavelength: float, orientation: float, config: FeatureConfig = DEFAULT_CONFIG
    ) -> "GaborParams":
        sigma = config.gabor_sigma_ratio * wavelength
        size = math.ceil(4.0 * sigma + 1.0)
        if size % 2 == 0:
            size += 1
        return cls(wavelength, orientation, sigma, config.gabor_gamma, max(size, 3))


@functools.lru_cache(maxsize=256)
def build_gabor_kernel(params: GaborParams) -> np.ndarray:
    """Even-phase Gabor kernel, zero mean and unit L2 norm (read-only)."""
    if params.kernel_size % 2 == 0:
        raise InvalidParamsError("kernel_size must be odd")
    half = params.kernel_size // 2
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    theta = math.radians(params.orientation)
    xr = x * math.cos(theta) + y * math.sin(theta)
    yr = -x * math.sin(theta) + y * math.cos(theta)
    env = np.exp(-(xr**2 + (params.gamma * yr) ** 2) / (2.0 * params.sigma**2))
    k = env * np.cos(2.0 * math.pi * xr / params.wavelength)
    k = k - k.mean()
    norm = np.linalg.norm(k)
    if norm == 0.0:
        raise InvalidParamsError(f"degenerate Gabor kernel for {params}")
    k = k / norm
    k.setflags(write=False)
    return k


def kernel_gain(kernel: np.ndarray) -> float:
    """Upper bound of ``|response|`` for grayscale input in [0, 1].

    A zero-mean kernel peaks when the input is 1 under its positive taps and
    0 elsewhere, so the bound is the sum of the positive taps.
    """
    return max(float(kernel[kernel > 0].sum()), RESPONSE_EPS)


# --------------------------------------------------------------- descriptors


_SHORT_NAMES = {
    Color.RED: "R", Color.ORANGE: "O", Color.YELLOW: "Y", Color.GREEN: "G",
    Color.CYAN: "C", Color.BLUE: "Bl", Color.PURPLE: "P", Color.MAGENTA: "M",
    Color.WHITE: "W", Color.BLACK: "B",
}


@dataclass(frozen=True)
class ColorDescriptor:
    bucket: Color
    kind = "color"

    @property
    def key(self) -> str:
        return f"color:{self.bucket.value}"

    @property
    def short(self) -> str:
        return _SHORT_NAMES[self.bucket]

    def to_dict(self) -> dict:
        return {"kind": "color", "bucket": self.bucket.value}


@dataclass(frozen=True)
class TextureDescriptor:
    params: GaborParams
    scale: float = field(default=0.0, compare=False)  # reference-size wavelength / sqrt(2)
    kind = "texture"

    @property
    def key(self) -> str:
        p = self.params
        return f"texture:{p.wavelength:.4f}@{p.orientation:g}"

    @property
    def short(self) -> str:
        return f"G({self.scale:g}r2,{self.params.orientation:g})"

    def to_dict(self) -> dict:
        return {"kind": "texture", "scale": self.scale, **asdict(self.params)}


SemanticDescriptor = Union[ColorDescriptor, TextureDescriptor]


def descriptor_from_dict(data: dict) -> SemanticDescriptor:
    data = dict(data)
    kind = data.pop("kind")
    if kind == "color":
        return ColorDescriptor(parse_color(data["bucket"]))
    if kind == "texture":
        scale = data.pop("scale", 0.0)
        return TextureDescriptor(GaborParams(**data), scale)
    raise InvalidSpecError(f"unknown descriptor kind {kind!r}")


def color_space(config: FeatureConfig = DEFAULT_CONFIG, colors=None) -> list[ColorDescriptor]:
    colors = _COLOR_ORDER if colors is None else [parse_color(c) for c in colors]
    return [ColorDescriptor(c) for c in colors]


def gabor_bank(image_size: int, config: FeatureConfig = DEFAULT_CONFIG) -> list[TextureDescriptor]:
    """The scale x orientation bank, wavelengths rescaled to ``image_size``."""
    ratio = image_size / config.gabor_reference_size
    bank = []
    for scale in config.gabor_scales:
        for theta in config.gabor_orientations:
            params = GaborParams.from_wavelength(scale * SQRT2 * ratio, theta, config)
            bank.append(TextureDescriptor(params, scale))
    return bank


# ------------------------------------------------------------------ features


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    dims: int
    descriptor: SemanticDescriptor
    extraction_cost: int


def _pixels(image) -> np.ndarray:
    pixels = getattr(image, "pixels", image)
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeError(f"expected an HxWx3 raster, got shape {pixels.shape}")
    return pixels


def _check_grid(shape, grid: int):
    h, w = shape[:2]
    if grid < 1 or grid > min(h, w):
        raise ShapeError(f"grid {grid} exceeds image size {h}x{w}")
    if grid * grid >= h * w:
        raise ShapeError("feature grid must be smaller than the image")


def grid_pool(arr: np.ndarray, grid: int) -> np.ndarray:
    """Average-pool a 2-D array onto ``grid x grid`` cells.

    Cell ``i`` covers rows ``[floor(i*n/g), ceil((i+1)*n/g))``, so no cell is
    empty even when the array is smaller than the grid.
    """
    n_r, n_c = arr.shape
    i = np.arange(grid)
    r0, r1 = i * n_r // grid, -(-(i + 1) * n_r // grid)
    c0, c1 = i * n_c // grid, -(-(i + 1) * n_c // grid)
    integral = np.zeros((n_r + 1, n_c + 1))
    integral[1:, 1:] = np.asarray(arr, dtype=np.float64).cumsum(0).cumsum(1)
    sums = (integral[np.ix_(r1, c1)] - integral[np.ix_(r0, c1)]
            - integral[np.ix_(r1, c0)] + integral[np.ix_(r0, c0)])
    return sums / np.outer(r1 - r0, c1 - c0)


def image_bucket_codes(image, config: FeatureConfig = DEFAULT_CONFIG) -> np.ndarray:
    return bucket_codes(rgb_to_hsv_array(_pixels(image)), config)


def extract_color_feature(
    image,
    bucket: Color,
    grid: int | None = None,
    config: FeatureConfig = DEFAULT_CONFIG,
    codes: np.ndarray | None = None,
) -> FeatureVector:
    """Pooled membership map of one color bucket.

    ``codes`` may carry a precomputed bucket map so several color leaves can
    share one HSV conversion.
    """
    pixels = _pixels(image)
    grid = config.grid if grid is None else grid
    _check_grid(pixels.shape, grid)
    bucket = parse_color(bucket)
    if codes is None:
        codes = image_bucket_codes(pixels, config)
    member = (codes == bucket.code).astype(np.float64)
    values = grid_pool(member, grid).ravel()
    desc = ColorDescriptor(bucket)
    return FeatureVector(values, values.size, desc, preprocessing_cost(desc, pixels.shape, config))


def grayscale(pixels: np.ndarray) -> np.ndarray:
    return (np.asarray(pixels, dtype=np.float64) / 255.0) @ LUMA


def extract_texture_feature(
    image, params: GaborParams, grid: int | None = None, config: FeatureConfig = DEFAULT_CONFIG
) -> FeatureVector:
    pixels = _pixels(image)
    grid = config.grid if grid is None else grid
    _check_grid(pixels.shape, grid)
    h, w = pixels.shape[:2]
    if params.kernel_size > min(h, w):
        raise InvalidParamsError(f"kernel {params.kernel_size} larger than image {h}x{w}")
    kernel = build_gabor_kernel(params)
    response = np.abs(convolve2d(grayscale(pixels), kernel, mode="valid"))
    values = (grid_pool(response, grid) / kernel_gain(kernel)).ravel()
    desc = TextureDescriptor(params)
    return FeatureVector(values, values.size, desc, preprocessing_cost(desc, pixels.shape, config))


def extract_feature(
    image, descriptor: SemanticDescriptor, grid: int | None = None,
    config: FeatureConfig = DEFAULT_CONFIG, codes: np.ndarray | None = None,
) -> FeatureVector:
    if isinstance(descriptor, ColorDescriptor):
        return extract_color_feature(image, descriptor.bucket, grid, config, codes=codes)
    return extract_texture_feature(image, descriptor.params, grid, config)


def feature_matrix(
    images, descriptor: SemanticDescriptor, grid: int | None = None,
    config: FeatureConfig = DEFAULT_CONFIG, codes_cache: list | None = None,
) -> np.ndarray:
    """Stack the feature vectors of many images, one row per image."""
    rows = []
    for i, image in enumerate(images):
        codes = codes_cache[i] if codes_cache is not None else None
        rows.append(extract_feature(image, descriptor, grid, config, codes=codes).values)
    return np.vstack(rows)


# --------------------------------------------------------------------- costs


def hsv_conversion_cost(dims, config: FeatureConfig = DEFAULT_CONFIG) -> int:
    """Shared per-image HSV conversion cost, paid once per image."""
    h, w = dims[:2]
    return config.cost_hsv_convert * h * w


def descriptor_marginal_cost(
    descriptor: SemanticDescriptor, dims, config: FeatureConfig = DEFAULT_CONFIG
) -> int:
    """Preprocessing cost of a descriptor once any shared HSV pass is paid."""
    h, w = dims[:2]
    pool = config.cost_pool * h * w
    if isinstance(descriptor, ColorDescriptor):
        return config.cost_bucket_test * h * w + pool
    k = descriptor.params.kernel_size
    return (h - k + 1) * (w - k + 1) * k * k + pool


def preprocessing_cost(
    descriptor: SemanticDescriptor, dims, config: FeatureConfig = DEFAULT_CONFIG
) -> int:
    """Standalone MAC-equivalent cost of extracting one descriptor's features."""
    cost = descriptor_marginal_cost(descriptor, dims, config)
    if isinstance(descriptor, ColorDescriptor):
        cost += hsv_conversion_cost(dims, config)
    return cost
