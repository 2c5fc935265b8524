"""Reader and writer for 2-port Touchstone v1 files and the internal S-parameter CSV.

Touchstone v1 layout accepted here::

    ! comment
    # GHz S RI R 50
    5.5  s11a s11b  s21a s21b  s12a s12b  s22a s22b

One frequency point per line, data columns in file order S11 S21 S12 S22.
Values are converted to Hz and rectangular complex form on input.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence

import numpy as np

from .errors import HRISError

FREQ_UNITS = {"HZ": 1, "KHZ": 10**3, "MHZ": 10**6, "GHZ": 10**9}
UNIT_NAMES = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}
FORMATS = ("RI", "MA", "DB")

CSV_HEADER_MIN = ["freq_hz", "s11_re", "s11_im", "s21_re", "s21_im"]
CSV_HEADER_FULL = CSV_HEADER_MIN + ["s12_re", "s12_im", "s22_re", "s22_im"]


class TouchstoneError(HRISError):
    """Base for parse errors; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingOptionLine(TouchstoneError):
    pass


class UnsupportedFormat(TouchstoneError):
    pass


class MalformedDataLine(TouchstoneError):
    pass


class DuplicateFrequency(TouchstoneError):
    pass


class HeaderMismatch(TouchstoneError):
    pass


class InvalidTable(HRISError):
    pass


@dataclass(frozen=True)
class SParamRecord:
    frequency: float
    s11: complex
    s21: complex
    s12: complex
    s22: complex

    def __post_init__(self):
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise InvalidTable(f"frequency must be positive and finite, got {self.frequency!r}")
        for name in ("s11", "s21", "s12", "s22"):
            v = complex(getattr(self, name))
            if not cmath.isfinite(v):
                raise InvalidTable(f"{name} is not finite at f={self.frequency!r} Hz")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class SParamTable:
    """Frequency-ordered 2-port S-parameter sweep.

    ``source_format`` and ``frequency_unit`` record how the data was (or will be)
    written; the records themselves are always Hz and rectangular complex.
    """

    records: tuple[SParamRecord, ...]
    reference_impedance: float = 50.0
    source_format: str = "RI"
    frequency_unit: str = "Hz"
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise InvalidTable("table has no records")
        if self.source_format not in FORMATS:
            raise InvalidTable(f"unknown format {self.source_format!r}")
        if self.frequency_unit.upper() not in FREQ_UNITS:
            raise InvalidTable(f"unknown frequency unit {self.frequency_unit!r}")
        if not (self.reference_impedance > 0 and math.isfinite(self.reference_impedance)):
            raise InvalidTable("reference impedance must be positive")
        freqs = [r.frequency for r in self.records]
        for k in range(1, len(freqs)):
            if not freqs[k] > freqs[k - 1]:
                raise InvalidTable(
                    f"frequencies not strictly ascending at record {k}: "
                    f"{freqs[k - 1]!r} then {freqs[k]!r}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def frequency(self) -> np.ndarray:
        return np.array([r.frequency for r in self.records])

    @property
    def s11(self) -> np.ndarray:
        return np.array([r.s11 for r in self.records])

    @property
    def s21(self) -> np.ndarray:
        return np.array([r.s21 for r in self.records])

    @property
    def s12(self) -> np.ndarray:
        return np.array([r.s12 for r in self.records])

    @property
    def s22(self) -> np.ndarray:
        return np.array([r.s22 for r in self.records])

    @classmethod
    def from_arrays(cls, frequency, s11, s21, s12=None, s22=None, **kwargs) -> "SParamTable":
        s12 = s21 if s12 is None else s12
        s22 = s11 if s22 is None else s22
        records = [
            SParamRecord(float(f), complex(a), complex(b), complex(c), complex(d))
            for f, a, b, c, d in zip(frequency, s11, s21, s12, s22)
        ]
        return cls(tuple(records), **kwargs)


def _fmt(x: float) -> str:
    # repr() is the shortest string that round-trips the double exactly
    return repr(float(x))


def _to_complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return cmath.rect(mag, math.radians(b))


def _from_complex(v: complex, fmt: str) -> tuple[float, float]:
    if fmt == "RI":
        return v.real, v.imag
    mag = abs(v)
    ang = math.degrees(math.atan2(v.imag, v.real))
    if fmt == "MA":
        return mag, ang
    return (20.0 * math.log10(mag) if mag > 0 else -math.inf), ang


def _parse_option_line(line: str, lineno: int) -> tuple[str, str, float]:
    tokens = line[1:].split()
    unit, param, fmt, z0 = "GHZ", "S", "MA", 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in FREQ_UNITS:
            unit = tok
        elif tok in FORMATS:
            fmt = tok
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise UnsupportedFormat("option 'R' without a reference impedance", lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise UnsupportedFormat(f"bad reference impedance {tokens[i + 1]!r}", lineno) from None
            if not (z0 > 0 and math.isfinite(z0)):
                raise UnsupportedFormat(f"reference impedance must be positive, got {z0}", lineno)
            i += 1
        elif tok in ("S", "Y", "Z", "H", "G"):
            param = tok
        else:
            raise UnsupportedFormat(f"unrecognised option {tokens[i]!r}", lineno)
        i += 1
    if param != "S":
        raise UnsupportedFormat(f"only S-parameters are supported, got {param}", lineno)
    return unit, fmt, z0


def parse_touchstone(text: str, keep_comments: bool = False) -> SParamTable:
    """Parse a 2-port Touchstone v1 document.

    Records are sorted by frequency; a repeated frequency raises
    :class:`DuplicateFrequency`. With ``keep_comments`` the text after every
    ``!`` is kept on the returned table.
    """
    option = None
    rows: list[tuple[float, int, tuple[complex, ...]]] = []
    comments: list[str] = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\r\n")
        if "!" in line:
            line, comment = line.split("!", 1)
            comments.append(comment.strip())
        line = line.strip()
        if not line:
            continue
        if line.startswith("["):
            raise UnsupportedFormat(f"Touchstone v2 keyword {line.split()[0]!r} not supported", lineno)
        if line.startswith("#"):
            if option is not None:
                raise UnsupportedFormat("more than one option line", lineno)
            option = _parse_option_line(line, lineno)
            continue
        if option is None:
            raise MissingOptionLine("data line before any '#' option line", lineno)
        tokens = line.split()
        if len(tokens) != 9:
            raise MalformedDataLine(
                f"expected 9 columns (2-port, one point per line), found {len(tokens)}", lineno
            )
        unit, fmt, _ = option
        try:
            freq = float(Decimal(tokens[0]) * FREQ_UNITS[unit])
            nums = [float(t) for t in tokens[1:]]
        except (InvalidOperation, ValueError):
            raise MalformedDataLine(f"unparsable number in {line!r}", lineno) from None
        if not (math.isfinite(freq) and freq > 0):
            raise MalformedDataLine(f"frequency must be positive, got {tokens[0]}", lineno)
        try:
            values = tuple(_to_complex(nums[2 * k], nums[2 * k + 1], fmt) for k in range(4))
        except (OverflowError, ValueError):
            raise MalformedDataLine(f"value out of range in {line!r}", lineno) from None
        if not all(cmath.isfinite(v) for v in values):
            raise MalformedDataLine("non-finite S-parameter value", lineno)
        rows.append((freq, lineno, values))

    if option is None:
        raise MissingOptionLine("no '#' option line found")
    if not rows:
        raise MalformedDataLine("no data lines")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] == prev[0]:
            first, second = sorted((prev[1], cur[1]))
            raise DuplicateFrequency(f"frequency {cur[0]!r} Hz repeats line {first}", second)
    unit, fmt, z0 = option
    records = tuple(SParamRecord(f, *vals) for f, _, vals in rows)
    return SParamTable(
        records,
        reference_impedance=z0,
        source_format=fmt,
        frequency_unit=UNIT_NAMES[unit],
        comments=tuple(comments) if keep_comments else (),
    )


def write_touchstone(
    table: SParamTable,
    format: str | None = None,
    frequency_unit: str | None = None,
    comments: Iterable[str] = (),
) -> str:
    """Serialise ``table`` as Touchstone v1 text."""
    if not isinstance(table, SParamTable) or len(table) == 0:
        raise InvalidTable("expected a non-empty SParamTable")
    fmt = (format or table.source_format).upper()
    unit = (frequency_unit or table.frequency_unit).upper()
    if fmt not in FORMATS:
        raise InvalidTable(f"unknown format {format!r}")
    if unit not in FREQ_UNITS:
        raise InvalidTable(f"unknown frequency unit {frequency_unit!r}")
    scale = FREQ_UNITS[unit]
    out = [f"! {c}" for c in comments]
    out.append(f"# {UNIT_NAMES[unit]} S {fmt} R {_fmt(table.reference_impedance)}")
    for r in table.records:
        cols = [_fmt(r.frequency / scale)]
        for v in (r.s11, r.s21, r.s12, r.s22):
            a, b = _from_complex(v, fmt)
            cols += [_fmt(a), _fmt(b)]
        out.append(" ".join(cols))
    return "\n".join(out) + "\n"


def parse_sparam_csv(text: str, reference_impedance: float = 50.0) -> SParamTable:
    """Parse the internal CSV format.

    Five-column files omit S12/S22; those default to S21 and S11 respectively
    (reciprocal, symmetric structure).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise HeaderMismatch("empty file", 1) from None
    if header not in (CSV_HEADER_MIN, CSV_HEADER_FULL):
        raise HeaderMismatch(
            f"expected {','.join(CSV_HEADER_MIN)}[,s12_re,s12_im,s22_re,s22_im], got {','.join(header)}", 1
        )
    ncol = len(header)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != ncol:
            raise MalformedDataLine(f"expected {ncol} columns, found {len(row)}", lineno)
        try:
            nums = [float(c) for c in row]
        except ValueError:
            raise MalformedDataLine(f"unparsable number in {','.join(row)!r}", lineno) from None
        if not all(math.isfinite(x) for x in nums) or nums[0] <= 0:
            raise MalformedDataLine("non-finite value or non-positive frequency", lineno)
        s11, s21 = complex(nums[1], nums[2]), complex(nums[3], nums[4])
        if ncol == 9:
            s12, s22 = complex(nums[5], nums[6]), complex(nums[7], nums[8])
        else:
            s12, s22 = s21, s11
        rows.append((nums[0], lineno, (s11, s21, s12, s22)))
    if not rows:
        raise MalformedDataLine("no data rows")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] == prev[0]:
            raise DuplicateFrequency(f"frequency {cur[0]!r} Hz repeats", max(prev[1], cur[1]))
    return SParamTable(
        tuple(SParamRecord(f, *v) for f, _, v in rows),
        reference_impedance=reference_impedance,
    )


def write_sparam_csv(table: SParamTable) -> str:
    if not isinstance(table, SParamTable) or len(table) == 0:
        raise InvalidTable("expected a non-empty SParamTable")
    lines = [",".join(CSV_HEADER_FULL)]
    for r in table.records:
        vals: Sequence[float] = (
            r.frequency,
            r.s11.real, r.s11.imag, r.s21.real, r.s21.imag,
            r.s12.real, r.s12.imag, r.s22.real, r.s22.imag,
        )
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def read_sparams(path, reference_impedance: float | None = None) -> SParamTable:
    """Load a ``.csv`` or Touchstone file, dispatching on the extension."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).lower().endswith(".csv"):
        return parse_sparam_csv(text, reference_impedance or 50.0)
    table = parse_touchstone(text)
    if reference_impedance is not None:
        table = SParamTable(table.records, reference_impedance, table.source_format, table.frequency_unit)
    return table
