"""Report rendering: heatmaps (PGM, SVG) and JSON/text documents."""

import json
from pathlib import Path
from typing import Any, Tuple, Union

import numpy as np
import structlog

from app.core.exceptions import ArgumentError, StoreIOError
from app.models.similarity import SimilarityMatrix
from app.schemas.pipeline import ImageFormat, Palette, RenderOptions

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]
MatrixLike = Union[SimilarityMatrix, np.ndarray]

SVG_CELL = 12

# (low end, high end) colors; lighter means more similar
PALETTES = {
    Palette.GRAY: ((0, 0, 0), (255, 255, 255)),
    Palette.BLUE: ((8, 48, 107), (247, 251, 255)),
}


def intensities(values: np.ndarray, clamp: Tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """Map values linearly from the clamp range to 0..255, saturating outside it."""
    lo, hi = clamp
    if not lo < hi:
        raise ArgumentError(f"clamp range must satisfy lo < hi, got {clamp}")
    scaled = (np.clip(values, lo, hi) - lo) / (hi - lo)
    return np.rint(255.0 * scaled).astype(np.uint8)


def _values(S: MatrixLike) -> np.ndarray:
    values = S.values if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    if values.ndim != 2 or not np.all(np.isfinite(values)):
        raise ArgumentError("heatmaps need a finite matrix")
    return values


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc.strerror or exc}", path=str(path)) from exc


def pgm_bytes(S: MatrixLike, clamp: Tuple[float, float] = (0.0, 1.0), scale: int = 1) -> bytes:
    """Binary PGM (P5): cell (i, j) at raster row i, column j."""
    pixels = intensities(_values(S), clamp)
    if scale > 1:
        pixels = np.repeat(np.repeat(pixels, scale, axis=0), scale, axis=1)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def _color(level: int, palette: Palette) -> str:
    low, high = PALETTES[palette]
    t = level / 255.0
    rgb = [int(round(a + (b - a) * t)) for a, b in zip(low, high)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def svg_text(
    S: MatrixLike,
    clamp: Tuple[float, float] = (0.0, 1.0),
    palette: Palette = Palette.GRAY,
    scale: int = 1
) -> str:
    """SVG grid with one rect per cell."""
    levels = intensities(_values(S), clamp)
    cell = SVG_CELL * scale
    rows, cols = levels.shape
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" height="{rows * cell}" '
        f'viewBox="0 0 {cols * cell} {rows * cell}">'
    ]
    for i in range(rows):
        for j in range(cols):
            parts.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="{_color(int(levels[i, j]), palette)}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_heatmap(
    S: MatrixLike,
    path: PathLike,
    options: RenderOptions = RenderOptions(),
    image_format: ImageFormat = ImageFormat.PGM
) -> Path:
    """Write a heatmap; PGM is always grayscale, SVG honors the palette."""
    path = Path(path)
    if image_format == ImageFormat.PGM:
        _write_bytes(path, pgm_bytes(S, options.clamp, options.scale))
    else:
        text = svg_text(S, options.clamp, options.palette, options.scale)
        _write_bytes(path, text.encode("utf-8"))
    logger.debug("heatmap_rendered", path=str(path), format=image_format.value)
    return path


def round_floats(document: Any) -> Any:
    """Round every float in a JSON-like document to 9 significant digits."""
    if isinstance(document, float):
        return float(f"{document:.9g}")
    if isinstance(document, dict):
        return {key: round_floats(value) for key, value in document.items()}
    if isinstance(document, (list, tuple)):
        return [round_floats(value) for value in document]
    return document


def write_json(document: Any, path: PathLike) -> Path:
    """Deterministic JSON: 9 significant digits, sorted keys, two-space indent."""
    path = Path(path)
    text = json.dumps(round_floats(document), indent=2, sort_keys=True) + "\n"
    _write_bytes(path, text.encode("utf-8"))
    return path


def write_text(text: str, path: PathLike) -> Path:
    path = Path(path)
    _write_bytes(path, text.encode("utf-8"))
    return path
