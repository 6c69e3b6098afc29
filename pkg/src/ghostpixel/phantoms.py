"""Synthetic test objects on square transmission grids.

Every generator returns a Phantom whose features transmit 1.0 against an
opaque background of 0.0, so bucket signals scale with open area and
contrast metrics can label feature/background regions by thresholding.
"""

from dataclasses import dataclass, field

import numpy as np

from .optics import Phantom

# 5x7 dot-matrix glyphs, one string per row, '#' = open pixel.
_FONT_5X7 = {
    "A": (" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"),
    "B": ("#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "),
    "C": (" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "),
    "D": ("#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "),
    "E": ("#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"),
    "F": ("#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "),
    "G": (" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"),
    "H": ("#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"),
    "I": (" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "),
    "J": ("  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "),
    "K": ("#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"),
    "L": ("#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"),
    "M": ("#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"),
    "N": ("#   #", "##  #", "# # #", "#  ##", "#   #", "#   #", "#   #"),
    "O": (" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "),
    "P": ("#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "),
    "Q": (" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"),
    "R": ("#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"),
    "S": (" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "),
    "T": ("#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "),
    "U": ("#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "),
    "V": ("#   #", "#   #", "#   #", "#   #", " # # ", " # # ", "  #  "),
    "W": ("#   #", "#   #", "#   #", "# # #", "# # #", "## ##", "#   #"),
    "X": ("#   #", " # # ", "  #  ", "  #  ", "  #  ", " # # ", "#   #"),
    "Y": ("#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "),
    "Z": ("#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"),
    " ": ("     ",) * 7,
}

_GLYPH_H = 7
_GLYPH_W = 5

PHANTOM_KINDS = ("letters", "gear", "semicylinder_gap", "knife_edge", "bar_target", "uniform")


def _text_bitmap(text: str) -> np.ndarray:
    """Row-of-glyphs bitmap with a one-cell gap between letters."""
    cols = []
    for ch in text.upper():
        if ch not in _FONT_5X7:
            raise ValueError(f"no glyph for character {ch!r}")
        if cols:
            cols.append(np.zeros((_GLYPH_H, 1), dtype=np.float64))
        glyph = np.array([[1.0 if c == "#" else 0.0 for c in row] for row in _FONT_5X7[ch]])
        cols.append(glyph)
    return np.hstack(cols)


def _center(canvas: np.ndarray, block: np.ndarray) -> np.ndarray:
    r0 = (canvas.shape[0] - block.shape[0]) // 2
    c0 = (canvas.shape[1] - block.shape[1]) // 2
    canvas[r0:r0 + block.shape[0], c0:c0 + block.shape[1]] = block
    return canvas


def letters(n: int, text: str = "CAS", pixel_pitch: float = 1.0) -> Phantom:
    """Dot-matrix text, integer-upscaled as large as fits, centered."""
    if not text:
        raise ValueError("text must be non-empty")
    bitmap = _text_bitmap(text)
    scale = min((n - 2) // bitmap.shape[0], (n - 2) // bitmap.shape[1])
    if scale < 1:
        raise ValueError(f"grid {n} too small for {len(text)} characters")
    block = np.repeat(np.repeat(bitmap, scale, axis=0), scale, axis=1)
    return Phantom(_center(np.zeros((n, n)), block), pixel_pitch)


def gear(n: int, teeth: int = 14, root_frac: float = 0.30, tip_frac: float = 0.42,
         duty: float = 0.5, pixel_pitch: float = 1.0) -> Phantom:
    """Spur gear: a disk whose radius alternates between root and tip as a
    square wave of the tooth angle, so teeth are countable on an angular
    profile taken between the two radii."""
    if teeth < 1:
        raise ValueError("teeth must be >= 1")
    if not 0.0 < root_frac < tip_frac <= 0.5:
        raise ValueError("need 0 < root_frac < tip_frac <= 0.5")
    c = (n - 1) / 2.0
    y, x = np.mgrid[0:n, 0:n]
    r = np.hypot(y - c, x - c)
    theta = np.arctan2(y - c, x - c)
    tooth_phase = np.mod(theta / (2.0 * np.pi) * teeth, 1.0)
    boundary = np.where(tooth_phase < duty, tip_frac * n, root_frac * n)
    return Phantom((r <= boundary).astype(np.float64), pixel_pitch)


def semicylinder_gap(n: int, gap_px: int = 1, radius_frac: float = 0.35,
                     column_width_frac: float = 0.22, pixel_pitch: float = 1.0) -> Phantom:
    """Half-disk and rectangular column separated by a thin opaque slit.

    Both solids transmit 1.0; the gap_px-wide slit between their facing
    flat edges stays at 0.0, giving a resolution target whose figure of
    merit is whether the slit survives reconstruction as a dark band.
    """
    if gap_px < 1 or gap_px >= n // 2:
        raise ValueError(f"gap_px {gap_px} unreasonable for grid {n}")
    img = np.zeros((n, n))
    cy = (n - 1) / 2.0
    radius = radius_frac * n
    gap_left = n // 2 - gap_px // 2  # first slit column
    gap_right = gap_left + gap_px    # first column past the slit
    # half-disk left of the slit, flat edge flush against it
    y, x = np.mgrid[0:n, 0:n]
    flat = gap_left - 1
    in_disk = (x <= flat) & (np.hypot(y - cy, x - flat) <= radius)
    img[in_disk] = 1.0
    # rectangular column right of the slit, same vertical extent
    width = max(1, int(round(column_width_frac * n)))
    top = int(np.ceil(cy - radius))
    bot = int(np.floor(cy + radius))
    img[max(top, 0):bot + 1, gap_right:min(gap_right + width, n)] = 1.0
    return Phantom(img, pixel_pitch)


def knife_edge(n: int, position: int | None = None, axis: str = "vertical",
               pixel_pitch: float = 1.0) -> Phantom:
    """Half-plane step: opaque up to `position`, open from there on.

    axis "vertical" means the edge line runs vertically (step along x).
    """
    pos = n // 2 if position is None else position
    if not 0 < pos < n:
        raise ValueError(f"edge position {pos} outside (0, {n})")
    img = np.zeros((n, n))
    if axis == "vertical":
        img[:, pos:] = 1.0
    elif axis == "horizontal":
        img[pos:, :] = 1.0
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return Phantom(img, pixel_pitch)


def bar_target(n: int, bar_width_px: int = 2, axis: str = "vertical",
               pixel_pitch: float = 1.0) -> Phantom:
    """Square-wave bar chart: alternating open/opaque bars of equal width."""
    if bar_width_px < 1:
        raise ValueError("bar_width_px must be >= 1")
    coord = np.arange(n)
    stripe = ((coord // bar_width_px) % 2 == 0).astype(np.float64)
    img = np.tile(stripe, (n, 1)) if axis == "vertical" else np.tile(stripe[:, None], (1, n))
    return Phantom(img, pixel_pitch)


def uniform(n: int, value: float = 1.0, pixel_pitch: float = 1.0) -> Phantom:
    """Flat field; value 1.0 is an open frame, 0.0 a dark frame."""
    return Phantom(np.full((n, n), float(value)), pixel_pitch)


_GENERATORS = {
    "letters": letters,
    "gear": gear,
    "semicylinder_gap": semicylinder_gap,
    "knife_edge": knife_edge,
    "bar_target": bar_target,
    "uniform": uniform,
}


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for a deterministic test object.

    side must be a power of two so the object pairs with a Hadamard basis;
    parameters are forwarded to the kind's generator (see PHANTOM_KINDS).
    """

    kind: str
    side: int
    pixel_pitch: float = 1.0
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _GENERATORS:
            raise ValueError(f"unknown phantom kind {self.kind!r}; choose from {PHANTOM_KINDS}")
        if self.side < 2 or self.side & (self.side - 1):
            raise ValueError(f"side {self.side} is not a power of two")


def generate(spec: PhantomSpec) -> Phantom:
    """Render the object a spec describes; pure and deterministic."""
    try:
        return _GENERATORS[spec.kind](spec.side, pixel_pitch=spec.pixel_pitch, **spec.parameters)
    except TypeError as exc:
        raise ValueError(f"bad parameters for phantom kind {spec.kind!r}: {exc}") from None
