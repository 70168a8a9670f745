"""
Pillow helpers: decode, letterbox, deterministic PNG encode
"""
import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.models.geometry import LetterboxTransform
from src.utils.error_handling import DecodeFailure, IoFailure


def decode_image(payload: bytes) -> Image.Image:
    try:
        image = Image.open(io.BytesIO(payload))
        image.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeFailure(payload={'reason': str(exc), 'bytes': len(payload)}) from exc
    return image.convert('RGB')


def letterbox_image(image: Image.Image, transform: LetterboxTransform, fill: int = 114) -> Image.Image:
    """Resize by transform.scale and paste centered on a fill-gray canvas"""
    canvas = Image.new('RGB', (transform.dst_w, transform.dst_h), (fill, fill, fill))
    size = transform.content_size
    if image.size != size:
        image = image.resize(size, Image.Resampling.BILINEAR)
    canvas.paste(image, transform.paste_offset)
    return canvas


def encode_png(image: Image.Image, compress_level: int = 6) -> bytes:
    """PNG bytes with pinned settings and no metadata chunks"""
    buffer = io.BytesIO()
    image.save(buffer, format='PNG', compress_level=compress_level, optimize=False)
    return buffer.getvalue()


def save_png(image: Image.Image, path, compress_level: int = 6):
    try:
        Path(path).write_bytes(encode_png(image, compress_level))
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc


def load_rgb(path) -> np.ndarray:
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert('RGB'))
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeFailure(payload={'path': str(path), 'reason': str(exc)}) from exc


def resize_array(array: np.ndarray, width: int, height: int) -> np.ndarray:
    if array.shape[1] == width and array.shape[0] == height:
        return array
    return np.asarray(Image.fromarray(array).resize((width, height), Image.Resampling.BILINEAR))
