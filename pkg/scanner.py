import os
import logging
import pathspec
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from operators import is_power_of_two
from seeding import Stream, derive_rng

logger = logging.getLogger(__name__)


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


class ImageScanner:
    """
    A class to scan an image directory while respecting ignore rules.

    Attributes:
        image_dir (Path): Root path of the image collection
        ignore_spec (pathspec.PathSpec): Compiled ignore patterns from `.imageignore`
        include_spec (pathspec.PathSpec): Patterns selecting image files
    """

    DEFAULT_PATTERNS = ['*.pgm', '*.png']

    def __init__(self, image_dir: str, patterns: Optional[Sequence[str]] = None):
        """
        Initialize the ImageScanner with a directory path.

        Args:
            image_dir (str): Path to the image directory
            patterns (Sequence[str], optional): gitwildmatch patterns of files to include

        Raises:
            FileNotFoundError: If the directory does not exist
            NotADirectoryError: If the path exists but is not a directory
        """
        self.image_dir = Path(image_dir).resolve()

        if not self.image_dir.exists():
            raise FileNotFoundError(f"Image directory does not exist: {self.image_dir}")
        if not self.image_dir.is_dir():
            raise NotADirectoryError(f"Path exists but is not a directory: {self.image_dir}")

        self.include_spec = pathspec.PathSpec.from_lines('gitwildmatch', patterns or self.DEFAULT_PATTERNS)
        self.ignore_spec = self._load_ignore()

    def _load_ignore(self) -> pathspec.PathSpec:
        """
        Load and compile ignore patterns.

        Returns:
            pathspec.PathSpec: Compiled ignore patterns (empty if no `.imageignore`)
        """
        ignore_path = self.image_dir / '.imageignore'

        if ignore_path.exists():
            with open(ignore_path, 'r') as f:
                return pathspec.PathSpec.from_lines('gitwildmatch', f)

        return pathspec.PathSpec([])

    def scan_files(self) -> List[Path]:
        """
        List image files in a deterministic (sorted relative path) order.

        Returns:
            List[Path]: Matching, non-ignored files
        """
        found = []

        for root, _, files in os.walk(self.image_dir):
            for filename in files:
                file_path = Path(root) / filename
                relative = str(file_path.relative_to(self.image_dir))

                if not self.include_spec.match_file(relative):
                    continue
                if self.ignore_spec.match_file(relative):
                    continue

                found.append(file_path)

        return sorted(found, key=lambda p: str(p.relative_to(self.image_dir)))

    def load_all(self, n: Optional[int] = None) -> Tuple[List[Tuple[Path, np.ndarray]], int]:
        """
        Load every scanned image as a padded vector of a common length.

        Args:
            n (int, optional): Target length; defaults to the largest padded length found

        Returns:
            Tuple of ([(path, vector)], number of unreadable files skipped)
        """
        grids = []
        skipped = 0

        for path in self.scan_files():
            try:
                grids.append((path, read_image_grid(path)))
            except OSError as e:
                logger.warning(f"Skipping unreadable image {path}: {e}")
                skipped += 1

        if not grids:
            return [], skipped

        if n is None:
            n = max(next_power_of_two(grid.size) for _, grid in grids)

        loaded = []
        for path, grid in grids:
            try:
                loaded.append((path, pad_grid(grid, n)))
            except ValueError as e:
                logger.warning(f"Skipping image {path}: {e}")
                skipped += 1

        return loaded, skipped


def read_image_grid(path: Path) -> np.ndarray:
    """
    Read an image as a grayscale grid scaled to [0, 1].

    Args:
        path (Path): Image file (PGM P5 or anything Pillow reads)

    Returns:
        np.ndarray: 2-D float array

    Raises:
        FileNotFoundError: If the file does not exist
        OSError: If the file cannot be decoded as an image
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image not found: {path}")

    try:
        with Image.open(path) as img:
            if img.mode in ('I;16', 'I;16B', 'I'):
                grid = np.asarray(img, dtype=np.float64)
                # 16-bit PGM keeps its own maxval; scale by the container range
                grid = grid / 65535.0
            else:
                grid = np.asarray(img.convert('L'), dtype=np.float64) / 255.0
    except UnidentifiedImageError as e:
        raise OSError(f"Unreadable image {path}: {e}") from e

    return grid


def pad_grid(grid: np.ndarray, n: int) -> np.ndarray:
    """
    Vectorize a pixel grid row-major and zero-pad it to length n.

    When n is a multiple of the row count and rows fit, each row is padded to
    width n / rows so the 2-D layout survives (missing columns are zero);
    otherwise the flattened grid is padded at the end.

    Args:
        grid (np.ndarray): 2-D pixel grid
        n (int): Target length, a power of two

    Returns:
        np.ndarray: Vector of length n

    Raises:
        ValueError: If n is not a power of two or the grid has more than n pixels
    """
    if not is_power_of_two(n):
        raise ValueError(f"Target length must be a power of two, got {n}")

    rows, cols = grid.shape
    if rows * cols > n:
        raise ValueError(f"Image with {rows}x{cols} pixels is larger than target length {n}")

    if n % rows == 0 and n // rows >= cols:
        padded = np.zeros((rows, n // rows))
        padded[:, :cols] = grid
        return padded.reshape(-1)

    vector = np.zeros(n)
    vector[:rows * cols] = grid.reshape(-1)
    return vector


def load_image_vector(path: str, n: Optional[int] = None) -> np.ndarray:
    """
    Load an image as a row-major grayscale vector in [0, 1], zero-padded.

    Args:
        path (str): Image file
        n (int, optional): Target length; defaults to the next power of two >= pixel count

    Returns:
        np.ndarray: Vector of length n
    """
    grid = read_image_grid(Path(path))
    if n is None:
        n = next_power_of_two(grid.size)
    vector = pad_grid(grid, n)
    if not np.any(vector):
        logger.warning(f"Image {path} is all zero; recovery on it is degenerate")
    return vector


def save_image_vector(vector: np.ndarray, shape: Tuple[int, int], path: str) -> Path:
    """
    Write a (recovered) vector back to an 8-bit PGM image.

    Args:
        vector (np.ndarray): Vector holding at least rows*cols pixels in row-major order
        shape (Tuple[int, int]): Grid shape (rows, cols) of the stored image
        path (str): Output file

    Returns:
        Path: The written file
    """
    rows, cols = shape
    vector = np.asarray(vector, dtype=np.float64)
    if vector.size < rows * cols:
        raise ValueError(f"Vector of length {vector.size} cannot fill a {rows}x{cols} image")

    pixels = np.clip(vector[:rows * cols].reshape(rows, cols), 0.0, 1.0)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.round(pixels * 255).astype(np.uint8)).save(out, format='PPM')
    return out


# Seven-segment layout: (row0, col0, row1, col1) in a 12x8 box
_SEGMENTS = {
    'a': (0, 1, 1, 7), 'b': (1, 6, 6, 7), 'c': (6, 6, 11, 7), 'd': (10, 1, 11, 7),
    'e': (6, 0, 11, 1), 'f': (1, 0, 6, 1), 'g': (5, 1, 6, 7),
}
_DIGITS = {
    0: 'abcdef', 1: 'bc', 2: 'abged', 3: 'abgcd', 4: 'fgbc',
    5: 'afgcd', 6: 'afgedc', 7: 'abc', 8: 'abcdefg', 9: 'abfgcd',
}


def render_digit(digit: int, rng: np.random.Generator, size: int = 16) -> np.ndarray:
    """Draw a jittered seven-segment digit with stroke noise on a size x size grid."""
    canvas = np.zeros((size, size))
    top = int(rng.integers(0, size - 12 + 1))
    left = int(rng.integers(0, size - 8 + 1))
    intensity = rng.uniform(0.7, 1.0)

    for name in _DIGITS[digit % 10]:
        r0, c0, r1, c1 = _SEGMENTS[name]
        canvas[top + r0:top + r1, left + c0:left + c1] = intensity

    stroke = canvas > 0
    canvas[stroke] += rng.normal(0.0, 0.05, size=int(stroke.sum()))
    return np.clip(canvas, 0.0, 1.0)


def generate_digit_images(out_dir: str, count: int = 50, seed: int = 0, size: int = 16) -> List[Path]:
    """
    Write ``count`` synthetic digit-like PGM images for self-contained image runs.

    Args:
        out_dir (str): Output directory (created if missing)
        count (int): Number of images
        seed (int): Master seed; image i uses its own derived stream
        size (int): Side length in pixels (at least 12)

    Returns:
        List[Path]: Written files, in order
    """
    if size < 12:
        raise ValueError(f"Digit images need size >= 12, got {size}")

    written = []
    for i in range(count):
        rng = derive_rng(seed, i, Stream.IMAGE)
        grid = render_digit(i % 10, rng, size)
        written.append(save_image_vector(grid.reshape(-1), (size, size), Path(out_dir) / f"digit_{i:03d}.pgm"))

    logger.info(f"Wrote {count} synthetic digit images to {out_dir}")
    return written
