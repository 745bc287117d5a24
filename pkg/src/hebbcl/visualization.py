"""Render neuron weight rows as image tiles and compose annotated grids.

Each tile is one neuron's weight row reshaped to the input image and min-max
normalized on its own; a constant row maps to mid-gray. Grids place tiles
row-major with 1-pixel separator lines, which double as per-tile borders for
the frozen/class annotations. Output is binary PPM (P6) always, PNG next to
it when Pillow is importable. Rendering never mutates the network.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .network import NO_CLASS, Network

# Shapes recoverable from the flat dimension alone, for checkpoints rendered
# without their source dataset.
KNOWN_IMAGE_SHAPES = {
    784: (1, 28, 28),
    3072: (3, 32, 32),
    11025: (1, 105, 105),
}

SEPARATOR_RGB = (0, 0, 0)
FROZEN_BORDER_RGB = (255, 64, 64)

# Distinct border colors for class annotation, cycled past ten classes.
CLASS_PALETTE = [
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207),
]


def infer_image_shape(input_dim: int) -> tuple[int, int, int]:
    if input_dim not in KNOWN_IMAGE_SHAPES:
        raise InvalidArgumentError(
            f"cannot infer an image shape for input_dim={input_dim}; pass one explicitly")
    return KNOWN_IMAGE_SHAPES[input_dim]


def weight_to_image(row: np.ndarray, image_shape: tuple[int, int, int]) -> np.ndarray:
    """Min-max normalize one weight row into an 8-bit image.

    Returns (H, W) grayscale for single-channel shapes, (H, W, 3) for RGB.
    A zero-range (constant) row becomes uniform mid-gray.
    """
    row = np.asarray(row, dtype=np.float32)
    c, h, w = image_shape
    if row.shape != (c * h * w,):
        raise InvalidArgumentError(
            f"row has {row.shape[0] if row.ndim == 1 else row.shape} values, "
            f"shape {image_shape} needs {c * h * w}")
    lo, hi = float(row.min()), float(row.max())
    if hi == lo:
        flat = np.full(row.shape, 128, dtype=np.uint8)
    else:
        flat = np.round((row - lo) / (hi - lo) * 255.0).astype(np.uint8)
    img = flat.reshape(c, h, w)
    if c == 1:
        return img[0]
    if c == 3:
        return np.moveaxis(img, 0, -1)
    raise InvalidArgumentError(f"unsupported channel count {c} (1 or 3)")


def _to_rgb(tile: np.ndarray) -> np.ndarray:
    if tile.ndim == 2:
        return np.repeat(tile[:, :, None], 3, axis=2)
    return tile


def render_grid(net: Network, image_shape: tuple[int, int, int] | None = None,
                cols: int = 25, annotate: str = "none") -> np.ndarray:
    """Compose every neuron's tile into one (H, W, 3) uint8 grid image.

    annotate="frozen" outlines frozen tiles; annotate="class" colors each
    tile's outline by its class tag (untagged rows keep the plain separator).
    The output is exactly cols*(w+1)+1 pixels wide and rows*(h+1)+1 tall.
    """
    if cols < 1:
        raise InvalidArgumentError(f"cols must be >= 1, got {cols}")
    if annotate not in ("none", "frozen", "class"):
        raise InvalidArgumentError(f"annotate must be none|frozen|class, got {annotate!r}")
    if image_shape is None:
        image_shape = infer_image_shape(net.input_dim)
    _, h, w = image_shape

    r = net.n_neurons
    grid_rows = (r + cols - 1) // cols
    height = grid_rows * (h + 1) + 1
    width = cols * (w + 1) + 1
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:] = SEPARATOR_RGB

    for j in range(r):
        gr, gc = divmod(j, cols)
        top, left = gr * (h + 1) + 1, gc * (w + 1) + 1

        border = None
        if annotate == "frozen" and net.frozen[j]:
            border = FROZEN_BORDER_RGB
        elif annotate == "class" and net.class_group[j] != NO_CLASS:
            border = CLASS_PALETTE[int(net.class_group[j]) % len(CLASS_PALETTE)]
        if border is not None:
            canvas[top - 1:top + h + 1, left - 1:left + w + 1] = border

        canvas[top:top + h, left:left + w] = _to_rgb(weight_to_image(net.weights[j], image_shape))
    return canvas


def save_ppm(image: np.ndarray, path: str | Path) -> None:
    """Write a binary PPM (P6): ASCII header then raw RGB bytes."""
    image = np.asarray(image, dtype=np.uint8)
    rgb = _to_rgb(image) if image.ndim == 2 else image
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(rgb).tobytes())


def save_image(image: np.ndarray, path_base: str | Path) -> list[Path]:
    """Write <base>.ppm always and <base>.png when Pillow is available."""
    base = Path(path_base)
    if base.suffix.lower() in (".ppm", ".png"):
        base = base.with_suffix("")
    written = []
    ppm_path = base.with_suffix(".ppm")
    save_ppm(image, ppm_path)
    written.append(ppm_path)
    try:
        from PIL import Image
    except ImportError:
        return written
    png_path = base.with_suffix(".png")
    Image.fromarray(_to_rgb(np.asarray(image, dtype=np.uint8))
                    if image.ndim == 2 else image).save(png_path)
    written.append(png_path)
    return written
