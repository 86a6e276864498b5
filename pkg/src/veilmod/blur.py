"""Stateless image-processing core: Gaussian kernels, separable blur, reveal
compositing, blur ladders, and region tile extraction.

All operations are pure functions of their inputs. Pixels are 8-bit samples;
blur arithmetic runs in float64 and is rounded back to 8-bit exactly once, so
the separable two-pass result stays within 1 LSB of a direct 2D convolution.
Boundaries are handled with reflect-101 (the edge pixel is not duplicated),
which avoids the darkened borders a zero pad would produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidImageError, InvalidParameterError, OutOfBoundsError

CIRCLE = "circle"
RECTANGLE = "rectangle"


@dataclass(eq=False)
class RasterImage:
    """Decoded 8-bit RGB(A) pixel grid.

    ``pixels`` is a (height, width, channels) uint8 array, i.e. row-major
    samples. Channels is 3 (RGB) or 4 (RGBA).
    """

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidImageError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        if self.channels not in (3, 4):
            raise InvalidImageError(f"channels must be 3 or 4, got {self.channels}")
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise InvalidImageError(f"pixels must be uint8, got {px.dtype}")
        if px.size != self.width * self.height * self.channels:
            raise InvalidImageError(
                f"pixel array length {px.size} != width*height*channels "
                f"({self.width}*{self.height}*{self.channels})"
            )
        self.pixels = px.reshape(self.height, self.width, self.channels)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.asarray(arr, dtype=np.uint8)
        if arr.ndim != 3:
            raise InvalidImageError(f"expected (h, w, c) array, got shape {arr.shape}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, pixels=arr)

    def copy(self) -> "RasterImage":
        return RasterImage(self.width, self.height, self.channels, self.pixels.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.channels == other.channels
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class Kernel1D:
    """Normalized one-dimensional Gaussian kernel of length 2*radius + 1."""

    sigma: float
    radius: int
    weights: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class RevealRegion:
    """A circular or rectangular reveal area in image pixel coordinates.

    A pixel belongs to a circle when its center (integer coordinates) satisfies
    (x - cx)^2 + (y - cy)^2 <= r^2; rectangles are half-open:
    origin <= coordinate < origin + extent.
    """

    shape: str
    center_x: float = 0.0
    center_y: float = 0.0
    radius: float = 0.0
    origin_x: float = 0.0
    origin_y: float = 0.0
    region_width: float = 0.0
    region_height: float = 0.0

    def __post_init__(self):
        if self.shape == CIRCLE:
            if self.radius <= 0:
                raise InvalidParameterError(f"circle radius must be > 0, got {self.radius}")
        elif self.shape == RECTANGLE:
            if self.region_width <= 0 or self.region_height <= 0:
                raise InvalidParameterError(
                    f"rectangle extents must be > 0, got {self.region_width}x{self.region_height}"
                )
        else:
            raise InvalidParameterError(f"unknown region shape {self.shape!r}")

    @classmethod
    def circle(cls, center_x: float, center_y: float, radius: float) -> "RevealRegion":
        return cls(shape=CIRCLE, center_x=center_x, center_y=center_y, radius=radius)

    @classmethod
    def rectangle(cls, origin_x: float, origin_y: float, width: float, height: float) -> "RevealRegion":
        return cls(
            shape=RECTANGLE,
            origin_x=origin_x,
            origin_y=origin_y,
            region_width=width,
            region_height=height,
        )

    def mask(self, width: int, height: int) -> np.ndarray:
        """Boolean (height, width) array marking pixels whose center lies inside."""
        yy, xx = np.mgrid[0:height, 0:width]
        if self.shape == CIRCLE:
            dx = xx - self.center_x
            dy = yy - self.center_y
            return dx * dx + dy * dy <= self.radius * self.radius
        return (
            (xx >= self.origin_x)
            & (xx < self.origin_x + self.region_width)
            & (yy >= self.origin_y)
            & (yy < self.origin_y + self.region_height)
        )

    def bounds(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Axis-aligned bounding box clipped to the image, as (x, y, w, h).

        Raises OutOfBoundsError when the region does not intersect the image.
        """
        if self.shape == CIRCLE:
            x0 = math.ceil(self.center_x - self.radius)
            x1 = math.floor(self.center_x + self.radius)
            y0 = math.ceil(self.center_y - self.radius)
            y1 = math.floor(self.center_y + self.radius)
        else:
            x0 = math.ceil(self.origin_x)
            x1 = math.ceil(self.origin_x + self.region_width) - 1
            y0 = math.ceil(self.origin_y)
            y1 = math.ceil(self.origin_y + self.region_height) - 1
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, width - 1), min(y1, height - 1)
        if x0 > x1 or y0 > y1:
            raise OutOfBoundsError(f"region {self} lies outside a {width}x{height} image")
        return x0, y0, x1 - x0 + 1, y1 - y0 + 1


def union_mask(regions: list[RevealRegion], width: int, height: int) -> np.ndarray:
    """Union of the regions' pixel masks as a boolean (height, width) array."""
    mask = np.zeros((height, width), dtype=bool)
    for region in regions:
        mask |= region.mask(width, height)
    return mask


def build_gaussian_kernel(sigma: float) -> Kernel1D:
    """Normalized 1D Gaussian kernel with radius ceil(3*sigma).

    sigma = 0 yields the identity kernel (radius 0, single unit weight).
    """
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return Kernel1D(sigma=0.0, radius=0, weights=np.array([1.0]))
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    weights /= weights.sum()
    return Kernel1D(sigma=float(sigma), radius=radius, weights=weights)


def _reflect101_indices(n: int, radius: int) -> np.ndarray:
    # Maps extended coordinates [-radius, n + radius) onto [0, n) by reflecting
    # about the edge pixels without duplicating them; degenerate n=1 pins to 0.
    idx = np.arange(-radius, n + radius)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    m = np.abs(idx) % period
    return np.where(m < n, m, period - m)


def _convolve_axis(data: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(weights) - 1) // 2
    if radius == 0:
        return data * weights[0]
    n = data.shape[axis]
    padded = np.take(data, _reflect101_indices(n, radius), axis=axis)
    out = np.zeros(data.shape, dtype=np.float64)
    window = [slice(None)] * data.ndim
    for i, w in enumerate(weights):
        window[axis] = slice(i, i + n)
        out += w * padded[tuple(window)]
    return out


def blur_image(image: RasterImage, sigma: float) -> RasterImage:
    """Gaussian-blur an image at strength sigma (pixels).

    Applies the separable kernel horizontally then vertically with reflect-101
    boundaries, rounding to 8-bit once after the vertical pass. An alpha
    channel passes through untouched; sigma = 0 returns a bit-identical copy.
    """
    kernel = build_gaussian_kernel(sigma)
    if kernel.radius == 0:
        return image.copy()
    color = image.pixels[:, :, :3].astype(np.float64)
    color = _convolve_axis(color, kernel.weights, axis=1)
    color = _convolve_axis(color, kernel.weights, axis=0)
    rounded = np.clip(np.rint(color), 0, 255).astype(np.uint8)
    if image.channels == 4:
        rounded = np.dstack([rounded, image.pixels[:, :, 3]])
    return RasterImage(image.width, image.height, image.channels, rounded)


def composite_reveal(
    original: RasterImage, blurred: RasterImage, regions: list[RevealRegion]
) -> RasterImage:
    """Splice original pixels over the blurred image inside the union of regions."""
    if (original.width, original.height, original.channels) != (
        blurred.width,
        blurred.height,
        blurred.channels,
    ):
        raise InvalidImageError(
            f"original {original.width}x{original.height}x{original.channels} and blurred "
            f"{blurred.width}x{blurred.height}x{blurred.channels} do not match"
        )
    mask = union_mask(regions, original.width, original.height)
    out = np.where(mask[:, :, None], original.pixels, blurred.pixels)
    return RasterImage(original.width, original.height, original.channels, out)


def blur_ladder(image: RasterImage, sigmas: list[float]) -> list[RasterImage]:
    """Blur renditions at a strictly decreasing list of sigmas (a slider ladder)."""
    if not sigmas:
        raise InvalidParameterError("sigma ladder must be non-empty")
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise InvalidParameterError(f"sigma ladder must be strictly decreasing, got {sigmas}")
    return [blur_image(image, s) for s in sigmas]


def region_tile(original: RasterImage, region: RevealRegion) -> RasterImage:
    """Crop the region's clipped bounding box out of the original image.

    This is the only path by which unblurred pixels leave the server: a tile
    is produced solely in reaction to an explicit reveal action.
    """
    x, y, w, h = region.bounds(original.width, original.height)
    tile = original.pixels[y : y + h, x : x + w, :].copy()
    return RasterImage(w, h, original.channels, tile)
