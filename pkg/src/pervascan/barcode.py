"""EAN-13 value type and the image-to-digits decode pipeline.

Decoding runs: global threshold -> run lengths per scanline -> guard-pattern
location -> per-digit nearest-pattern classification -> parity lookup of the
leading digit -> checksum. Every code that leaves this module carries a
valid check digit; anything unreadable raises instead, so a wrong code can
only come from a misread that also happens to satisfy the mod-10 rule and
the parity table, never from a partial result.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import groupby
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # only needed for annotations; the code is duck-typed
    from .imagekit import GrayImage

ODD = "odd"
EVEN = "even"

# Left-odd (L) 7-module digit patterns, 0 = space, 1 = bar. Right patterns
# are the bitwise complement of L; left-even (G) patterns are the right
# patterns reversed. verify_tables() below cross-checks the structural
# properties at import time.
L_CODES = (
    "0001101", "0011001", "0010011", "0111101", "0100011",
    "0110001", "0101111", "0111011", "0110111", "0001011",
)
R_CODES = tuple("".join("1" if b == "0" else "0" for b in p) for p in L_CODES)
G_CODES = tuple(p[::-1] for p in R_CODES)

# Parity (O = L pattern, E = G pattern) of the six left digits encodes the
# leading digit, which has no bars of its own.
PARITY_PATTERNS = (
    "OOOOOO", "OOEOEE", "OOEEOE", "OOEEEO", "OEOOEE",
    "OEEOOE", "OEEEOO", "OEOEOE", "OEOEEO", "OEEOEO",
)

START_GUARD = "101"
MIDDLE_GUARD = "01010"
END_GUARD = "101"

GUARD_TOLERANCE = 0.4      # per-run slack around the nominal module width
CLASSIFY_TOLERANCE = 1.4   # L1 budget, in modules, across a digit's four runs
MIN_QUIET_MODULES = 3      # relaxed from the nominal quiet zone for tight crops


class BarcodeError(Exception):
    """Base for this module's failures; `code` is the wire-level error name."""

    code = "barcode_error"


class BadLength(BarcodeError, ValueError):
    code = "bad_length"


class InvalidCode(BarcodeError, ValueError):
    code = "invalid_code"


class NoContrast(BarcodeError):
    code = "no_contrast"


class DecodeError(BarcodeError):
    """A scanline or image that could not be read."""

    code = "decode_error"


class NoBarcodeFound(DecodeError):
    code = "no_barcode_found"


class DigitUnreadable(DecodeError):
    code = "digit_unreadable"


class UnknownParityPattern(DecodeError):
    code = "unknown_parity_pattern"


class ChecksumMismatch(DecodeError):
    code = "checksum_mismatch"


def _is_digits(text: str) -> bool:
    return text.isascii() and text.isdigit()


def checksum_digit(payload: str) -> int:
    """Mod-10 check digit over 12 digits; odd positions weigh 1, even weigh 3."""
    if len(payload) != 12 or not _is_digits(payload):
        raise BadLength("payload must be exactly 12 decimal digits")
    total = sum(int(c) * (1 if i % 2 == 0 else 3) for i, c in enumerate(payload))
    return (10 - total % 10) % 10


def validate(code: str) -> bool:
    """True iff the 13th digit is the weighted mod-10 checksum of the first 12."""
    if len(code) != 13 or not _is_digits(code):
        raise BadLength("code must be exactly 13 decimal digits")
    return int(code[12]) == checksum_digit(code[:12])


@dataclass(frozen=True)
class Ean13:
    """A checksum-valid 13-digit code; str() gives the canonical digit string."""

    digits: str

    def __post_init__(self):
        if len(self.digits) != 13 or not _is_digits(self.digits):
            raise InvalidCode(f"need 13 decimal digits, got {self.digits!r}")
        if not validate(self.digits):
            raise InvalidCode(f"check digit mismatch in {self.digits}")

    def __str__(self) -> str:
        return self.digits


def symbol_modules(digits: str) -> np.ndarray:
    """95-element 0/1 module pattern for a 13-digit string.

    The checksum is deliberately NOT enforced here so tests can rasterize
    broken symbols; render_ean13 validates before calling this.
    """
    if len(digits) != 13 or not _is_digits(digits):
        raise InvalidCode(f"need 13 decimal digits, got {digits!r}")
    parities = PARITY_PATTERNS[int(digits[0])]
    parts = [START_GUARD]
    for flag, c in zip(parities, digits[1:7]):
        parts.append((L_CODES if flag == "O" else G_CODES)[int(c)])
    parts.append(MIDDLE_GUARD)
    for c in digits[7:13]:
        parts.append(R_CODES[int(c)])
    parts.append(END_GUARD)
    return np.array([int(b) for b in "".join(parts)], dtype=np.uint8)


def otsu_threshold(image: GrayImage) -> int:
    """Histogram threshold maximizing between-class variance.

    Pixels <= t classify as black. Ties resolve to the smallest t.
    """
    hist = np.bincount(np.asarray(image.array).ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise NoContrast("image has a single intensity level")
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    cum_mean = np.cumsum(hist * levels)
    total, grand = w0[-1], cum_mean[-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.divide(cum_mean, w0, out=np.zeros(256), where=valid)
    mu1 = np.divide(grand - cum_mean, w1, out=np.zeros(256), where=valid)
    sigma_b = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return int(np.argmax(sigma_b))  # argmax takes the first (smallest) maximizer


@dataclass(frozen=True)
class RunSequence:
    """Alternating same-color runs of one scanline; lengths sum to its width."""

    starting_color: str  # "black" or "white"
    runs: tuple[int, ...]


def run_lengths(row: Sequence[bool] | np.ndarray) -> RunSequence:
    """Maximal same-color runs, left to right. True/1 means black."""
    bits = np.asarray(row, dtype=bool)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("row must be a non-empty 1-D bit sequence")
    edges = np.flatnonzero(np.diff(bits)) + 1
    bounds = np.concatenate(([0], edges, [bits.size]))
    runs = tuple(int(n) for n in np.diff(bounds))
    return RunSequence("black" if bits[0] else "white", runs)


def _triple_ok(triple: Sequence[int], module: float) -> bool:
    return all(abs(r - module) <= GUARD_TOLERANCE * module for r in triple)


def locate_symbol(seq: RunSequence) -> tuple[tuple[int, ...], float]:
    """First 59-run window framed like a symbol, plus its module width.

    A window qualifies when a quiet white run of >= MIN_QUIET_MODULES
    precedes a 1:1:1 black-white-black start triple, the end triple 56 runs
    later matches as well, every middle-guard run sits within
    GUARD_TOLERANCE of the module width (the mean of the six guard runs),
    and the window is followed by quiet space or the line end.
    """
    runs = seq.runs
    n = len(runs)
    # black runs sit at even indices when the line starts black, odd
    # otherwise; a leading quiet run must exist, so skip index 0
    first = 2 if seq.starting_color == "black" else 1
    for i in range(first, n - 58, 2):
        start_triple = runs[i : i + 3]
        m_start = sum(start_triple) / 3.0
        if not _triple_ok(start_triple, m_start):
            continue
        if runs[i - 1] < MIN_QUIET_MODULES * m_start:
            continue
        end_triple = runs[i + 56 : i + 59]
        module = (sum(start_triple) + sum(end_triple)) / 6.0
        if not (_triple_ok(start_triple, module) and _triple_ok(end_triple, module)):
            continue
        if not _triple_ok(runs[i + 27 : i + 32], module):
            continue
        after = i + 59
        if after < n and runs[after] < MIN_QUIET_MODULES * module:
            continue
        return tuple(runs[i:after]), module
    raise NoBarcodeFound("no guard-framed 59-run window on this scanline")


def _pattern_runs(pattern: str) -> tuple[int, ...]:
    return tuple(len(list(group)) for _, group in groupby(pattern))


_LEFT_CANDIDATES = tuple(
    [(d, ODD, _pattern_runs(p)) for d, p in enumerate(L_CODES)]
    + [(d, EVEN, _pattern_runs(p)) for d, p in enumerate(G_CODES)]
)
_RIGHT_CANDIDATES = tuple((d, EVEN, _pattern_runs(p)) for d, p in enumerate(R_CODES))


def classify_digit(
    four_runs: Sequence[int | float], module_width: float, side: str
) -> tuple[int, str]:
    """Nearest digit pattern by L1 distance over the four run widths.

    Runs are rescaled so the digit spans exactly 7 modules, which makes the
    match scale-free; `module_width` is the caller's estimate from the
    guards and is not needed beyond the contract. Left-side digits start on
    a space, right-side digits on a bar.
    """
    runs = tuple(float(r) for r in four_runs)
    if len(runs) != 4:
        raise ValueError("a digit spans exactly four runs")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    scale = 7.0 / sum(runs)
    scaled = tuple(r * scale for r in runs)
    best_digit, best_parity, best_dist = -1, "", float("inf")
    candidates = _LEFT_CANDIDATES if side == "left" else _RIGHT_CANDIDATES
    for digit, parity, form in candidates:
        dist = sum(abs(s - f) for s, f in zip(scaled, form))
        if dist < best_dist:
            best_digit, best_parity, best_dist = digit, parity, dist
    if best_dist > CLASSIFY_TOLERANCE:
        raise DigitUnreadable(f"nearest pattern is {best_dist:.2f} modules away")
    return best_digit, best_parity


def parity_to_first_digit(parities: Iterable[str]) -> int:
    """Leading digit implied by the left-half parity sequence."""
    flags = tuple(parities)
    if len(flags) != 6 or any(f not in (ODD, EVEN) for f in flags):
        raise ValueError("expected six odd/even flags")
    key = "".join("O" if f == ODD else "E" for f in flags)
    try:
        return PARITY_PATTERNS.index(key)
    except ValueError:
        raise UnknownParityPattern(key) from None


def _decode_oriented(bits: np.ndarray) -> Ean13:
    window, module = locate_symbol(run_lengths(bits))
    left_digits, parities = [], []
    for k in range(6):
        digit, parity = classify_digit(window[3 + 4 * k : 7 + 4 * k], module, "left")
        left_digits.append(digit)
        parities.append(parity)
    right_digits = [
        classify_digit(window[32 + 4 * k : 36 + 4 * k], module, "right")[0]
        for k in range(6)
    ]
    leading = parity_to_first_digit(parities)
    code = "".join(map(str, [leading, *left_digits, *right_digits]))
    if not validate(code):
        raise ChecksumMismatch(f"assembled {code} fails the mod-10 rule")
    return Ean13(code)


def decode_scanline(row: Sequence[bool] | np.ndarray) -> tuple[Ean13, bool]:
    """Decode one binarized row; falls back to right-to-left on failure.

    Returns (code, reversed). The code always carries a valid checksum.
    """
    bits = np.asarray(row, dtype=bool)
    try:
        return _decode_oriented(bits), False
    except DecodeError as forward_error:
        try:
            return _decode_oriented(bits[::-1]), True
        except DecodeError:
            raise forward_error from None


@dataclass(frozen=True)
class DecodeReport:
    """Outcome of a multi-scanline decode, with agreement stats."""

    code: Ean13
    scanlines_attempted: int
    scanlines_agreeing: int
    reversed: bool


def decode_image(image: GrayImage, n_scanlines: int = 7) -> DecodeReport:
    """Decode by plurality vote over rows spread across the middle 80% of height.

    Ties go to the code seen on the topmost scanline. Raises NoContrast for
    flat images and NoBarcodeFound when no scanline decodes at all.
    """
    if n_scanlines < 1:
        raise ValueError("n_scanlines must be >= 1")
    threshold = otsu_threshold(image)
    black = image.array <= threshold
    h = image.height
    rows = np.rint(np.linspace(0.1 * (h - 1), 0.9 * (h - 1), n_scanlines)).astype(int)
    outcomes: list[tuple[str, bool]] = []
    for y in rows:
        try:
            code, was_reversed = decode_scanline(black[y])
        except DecodeError:
            continue
        outcomes.append((code.digits, was_reversed))
    if not outcomes:
        raise NoBarcodeFound(f"none of {n_scanlines} scanlines decoded")
    counts = Counter(digits for digits, _ in outcomes)
    top = max(counts.values())
    digits, was_reversed = next(o for o in outcomes if counts[o[0]] == top)
    return DecodeReport(Ean13(digits), n_scanlines, top, was_reversed)


def verify_tables() -> None:
    """Structural checks on the digit and parity tables; raises on any defect."""
    for name, table in (("L", L_CODES), ("G", G_CODES), ("R", R_CODES)):
        if len(table) != 10:
            raise RuntimeError(f"{name} table must have 10 entries")
        for d, pattern in enumerate(table):
            if len(pattern) != 7 or set(pattern) - {"0", "1"}:
                raise RuntimeError(f"{name}({d}) is not a 7-module bit pattern")
            if len(_pattern_runs(pattern)) != 4:
                raise RuntimeError(f"{name}({d}) must have exactly 4 runs")
    for d in range(10):
        if L_CODES[d].count("1") % 2 != 1:
            raise RuntimeError(f"L({d}) must have odd bit parity")
        if R_CODES[d].count("1") % 2 != 0 or G_CODES[d].count("1") % 2 != 0:
            raise RuntimeError(f"R({d})/G({d}) must have even bit parity")
        if R_CODES[d] != "".join("1" if b == "0" else "0" for b in L_CODES[d]):
            raise RuntimeError(f"R({d}) must be the complement of L({d})")
        if G_CODES[d] != R_CODES[d][::-1]:
            raise RuntimeError(f"G({d}) must be R({d}) reversed")
        if L_CODES[d][0] != "0" or L_CODES[d][-1] != "1":
            raise RuntimeError(f"L({d}) must start with a space and end with a bar")
    if len(set(PARITY_PATTERNS)) != 10:
        raise RuntimeError("parity table must have 10 distinct entries")
    for d, pattern in enumerate(PARITY_PATTERNS):
        if len(pattern) != 6 or set(pattern) - {"O", "E"}:
            raise RuntimeError(f"parity({d}) is not six O/E flags")
        if pattern[0] != "O":
            raise RuntimeError(f"parity({d}) must start odd")
        if d > 0 and pattern.count("E") != 3:
            raise RuntimeError(f"parity({d}) must contain exactly three even flags")
    if PARITY_PATTERNS[0] != "OOOOOO":
        raise RuntimeError("parity(0) must be all odd")


verify_tables()
