"""Touchstone v1 S-parameter file I/O and frequency-grid resampling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .errors import TouchstoneError, ViaqualError

_UNIT_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_UNIT_LABEL = {"hz": "Hz", "khz": "kHz", "mhz": "MHz", "ghz": "GHz"}
_FORMATS = ("RI", "MA", "DB")

# Floor used when writing a zero magnitude in DB format; 10**(-600/20) = 1e-30
# is far below any representable network content.
_DB_FLOOR = -600.0


@dataclass(frozen=True, eq=False)
class SParameterNetwork:
    """N-port scattering data on a frequency grid.

    ``s`` has shape (F, N, N); entry [k, i, j] is the response at port i+1
    due to excitation at port j+1, at ``frequencies_hz[k]``.
    """

    frequencies_hz: np.ndarray
    s: np.ndarray
    reference_ohms: float = 50.0
    source_format: str = "RI"
    comments: tuple[str, ...] = ()

    def __post_init__(self):
        freqs = np.asarray(self.frequencies_hz, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        object.__setattr__(self, "frequencies_hz", freqs)
        object.__setattr__(self, "s", s)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ViaqualError("frequency grid must be a non-empty 1-D array")
        if np.any(freqs < 0):
            raise ViaqualError("frequencies must be >= 0")
        if np.any(np.diff(freqs) <= 0):
            raise ViaqualError("frequencies must be strictly increasing")
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise ViaqualError(f"S data must have shape (F, N, N), got {s.shape}")
        if s.shape[0] != freqs.size:
            raise ViaqualError(
                f"{freqs.size} frequencies but {s.shape[0]} S matrices"
            )
        if not np.all(np.isfinite(s)):
            raise ViaqualError("S data contains non-finite entries")
        if self.reference_ohms <= 0:
            raise ViaqualError("reference impedance must be positive")
        if self.source_format not in _FORMATS:
            raise ViaqualError(f"unknown source format {self.source_format!r}")

    @property
    def port_count(self) -> int:
        return self.s.shape[1]

    @property
    def f_min_hz(self) -> float:
        return float(self.frequencies_hz[0])

    @property
    def f_max_hz(self) -> float:
        return float(self.frequencies_hz[-1])

    def s_entry(self, i: int, j: int) -> np.ndarray:
        """S_ij versus frequency, 1-based port indices."""
        return self.s[:, i - 1, j - 1]

    def isclose(self, other: "SParameterNetwork", rtol=1e-9, atol=1e-12) -> bool:
        return (
            self.port_count == other.port_count
            and self.frequencies_hz.shape == other.frequencies_hz.shape
            and np.allclose(self.frequencies_hz, other.frequencies_hz, rtol=rtol)
            and np.allclose(self.s, other.s, rtol=rtol, atol=atol)
            and np.isclose(self.reference_ohms, other.reference_ohms, rtol=rtol)
        )


def _to_complex(fmt: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    if fmt == "MA":
        return a * np.exp(1j * np.deg2rad(b))
    if fmt == "DB":
        return 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
    raise TouchstoneError(f"unsupported data format {fmt!r}")


def _from_complex(fmt: str, z: complex) -> tuple[float, float]:
    if fmt == "RI":
        return z.real, z.imag
    mag = abs(z)
    ang = np.degrees(np.angle(z)) if mag > 0 else 0.0
    if fmt == "MA":
        return mag, ang
    db = 20.0 * np.log10(mag) if mag > 0 else _DB_FLOOR
    return db, ang


def _matrix_order(n: int) -> list[tuple[int, int]]:
    # 2-port files use the historical S11 S21 S12 S22 order; all other
    # port counts are row-major.
    if n == 2:
        return [(0, 0), (1, 0), (0, 1), (1, 1)]
    return [(i, j) for i in range(n) for j in range(n)]


def _iter_lines(source: str | IO[str]) -> Iterable[str]:
    if hasattr(source, "read"):
        return source.read().splitlines()
    return source.splitlines()


def _infer_port_count(data_lines: list[tuple[int, list[float]]]) -> int:
    """Guess the port count from the token layout of the first records.

    1/2/3-port records are single lines of 3/9/7 values (3-port rows wrap
    one row per line, first line carries the frequency).  A 4-port first
    line also holds 9 values but is followed by 8-value row lines.
    """
    first_len = len(data_lines[0][1])
    if first_len == 3:
        return 1
    if first_len == 9:
        if len(data_lines) > 1 and len(data_lines[1][1]) == 8:
            return 4
        return 2
    if first_len == 7:
        return 3
    raise TouchstoneError(
        "cannot infer port count from a first record of "
        f"{first_len} values; pass port_count_hint",
        line=data_lines[0][0],
    )


def parse_touchstone(
    source: str | IO[str], port_count_hint: int | None = None
) -> SParameterNetwork:
    """Parse Touchstone v1 text into a network.

    Frequencies are converted to Hz and values to complex regardless of the
    file's format.  Comment lines are preserved.  Touchstone v2 keyword
    files are rejected; a trailing 2-port noise-parameter section is
    skipped with a warning.
    """
    unit = "ghz"
    fmt = "MA"
    z0 = 50.0
    comments: list[str] = []
    option_seen = False
    data_lines: list[tuple[int, list[float]]] = []

    for ln, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneError(
                "Touchstone v2 keyword found; only v1 files are supported",
                line=ln,
            )
        if line.startswith("!"):
            comments.append(line[1:].strip())
            continue
        if "!" in line:
            line = line.split("!", 1)[0].strip()
            if not line:
                continue
        if line.startswith("#"):
            if option_seen:
                raise TouchstoneError("duplicate option line", line=ln)
            option_seen = True
            tokens = line[1:].split()
            k = 0
            while k < len(tokens):
                tok = tokens[k].lower()
                if tok in _UNIT_SCALE:
                    unit = tok
                elif tok in ("ri", "ma", "db"):
                    fmt = tok.upper()
                elif tok == "r":
                    if k + 1 >= len(tokens):
                        raise TouchstoneError(
                            "option line: R given without impedance", line=ln
                        )
                    k += 1
                    try:
                        z0 = float(tokens[k])
                    except ValueError:
                        raise TouchstoneError(
                            f"option line: bad impedance {tokens[k]!r}", line=ln
                        ) from None
                elif tok == "s":
                    pass
                elif tok in ("y", "z", "h", "g"):
                    raise TouchstoneError(
                        f"parameter type {tok.upper()!r} not supported "
                        "(S-parameters only)",
                        line=ln,
                    )
                else:
                    raise TouchstoneError(
                        f"option line: unknown token {tokens[k]!r}", line=ln
                    )
                k += 1
            continue
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise TouchstoneError(f"bad numeric value ({exc})", line=ln) from None
        data_lines.append((ln, values))

    if not data_lines:
        raise TouchstoneError("no data records found")

    nports = port_count_hint or _infer_port_count(data_lines)
    if nports < 1:
        raise ViaqualError("port_count_hint must be >= 1")
    need = 1 + 2 * nports * nports

    freqs_raw: list[float] = []
    records: list[list[float]] = []
    pending: list[float] = []
    pending_line = 0
    noise_skipped = False

    for ln, values in data_lines:
        if not pending:
            pending_line = ln
            # 2-port noise sections restart at a lower frequency with
            # 5-value records; ignore everything from there on.
            if (
                nports == 2
                and freqs_raw
                and len(values) == 5
                and values[0] < freqs_raw[-1]
            ):
                noise_skipped = True
                break
        pending.extend(values)
        if len(pending) > need:
            raise TouchstoneError(
                f"expected {need} values per record, got {len(pending)}",
                line=pending_line,
            )
        if len(pending) == need:
            freqs_raw.append(pending[0])
            records.append(pending[1:])
            if len(freqs_raw) > 1 and freqs_raw[-1] <= freqs_raw[-2]:
                raise TouchstoneError(
                    f"non-monotonic frequency {pending[0]!r}", line=pending_line
                )
            pending = []

    if pending:
        raise TouchstoneError(
            f"incomplete record: expected {need} values, got {len(pending)}",
            line=pending_line,
        )
    if noise_skipped:
        warnings.warn(
            "noise-parameter section ignored (not applicable to S-parameter work)",
            stacklevel=2,
        )

    scale = _UNIT_SCALE[unit]
    freqs = np.array(freqs_raw) * scale
    order = _matrix_order(nports)
    s = np.empty((len(records), nports, nports), dtype=complex)
    for k, rec in enumerate(records):
        vals = np.asarray(rec).reshape(-1, 2)
        entries = _to_complex(fmt, vals[:, 0], vals[:, 1])
        for (i, j), z in zip(order, entries):
            s[k, i, j] = z

    return SParameterNetwork(
        frequencies_hz=freqs,
        s=s,
        reference_ohms=z0,
        source_format=fmt,
        comments=tuple(comments),
    )


def _fnum(x: float) -> str:
    # repr() is the shortest string that round-trips the double exactly.
    return repr(float(x))


def write_touchstone(
    net: SParameterNetwork, fmt: str = "RI", freq_unit: str = "GHz"
) -> str:
    """Render a network as Touchstone v1 text.

    Values are written with full round-trip precision so that
    ``parse_touchstone(write_touchstone(net))`` reproduces ``net``.
    """
    fmt = fmt.upper()
    if fmt not in _FORMATS:
        raise ViaqualError(f"unknown Touchstone format {fmt!r}")
    unit = freq_unit.lower()
    if unit not in _UNIT_SCALE:
        raise ViaqualError(f"unknown frequency unit {freq_unit!r}")

    lines = [f"! {c}" if c else "!" for c in net.comments]
    lines.append(f"# {_UNIT_LABEL[unit]} S {fmt} R {net.reference_ohms:g}")

    n = net.port_count
    order = _matrix_order(n)
    scale = _UNIT_SCALE[unit]
    # Rows of 3+ port matrices start on fresh lines and wrap every 4
    # complex values, per the classic convention.
    for k, f in enumerate(net.frequencies_hz):
        pairs = [_from_complex(fmt, net.s[k, i, j]) for (i, j) in order]
        if n <= 2:
            fields = [_fnum(f / scale)]
            for a, b in pairs:
                fields += [_fnum(a), _fnum(b)]
            lines.append(" ".join(fields))
        else:
            row_len = n
            for r in range(n):
                row = pairs[r * row_len : (r + 1) * row_len]
                for start in range(0, row_len, 4):
                    chunk = row[start : start + 4]
                    fields = []
                    if r == 0 and start == 0:
                        fields.append(_fnum(f / scale))
                    for a, b in chunk:
                        fields += [_fnum(a), _fnum(b)]
                    lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def read_touchstone(path: str | Path) -> SParameterNetwork:
    """Read a Touchstone file, taking the port count from the .sNp suffix."""
    path = Path(path)
    hint = None
    suffix = path.suffix.lower()
    if suffix.startswith(".s") and suffix.endswith("p"):
        try:
            hint = int(suffix[2:-1])
        except ValueError:
            hint = None
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        return parse_touchstone(handle, port_count_hint=hint)


def write_touchstone_file(
    net: SParameterNetwork,
    path: str | Path,
    fmt: str = "RI",
    freq_unit: str = "GHz",
) -> Path:
    path = Path(path)
    path.write_text(write_touchstone(net, fmt=fmt, freq_unit=freq_unit))
    return path


def resample(
    net: SParameterNetwork,
    grid_hz,
    dc_extrapolation: bool = False,
) -> SParameterNetwork:
    """Interpolate a network onto a new frequency grid.

    Interpolation is linear on real and imaginary parts independently.
    Points above the measured band are refused.  Points below it are
    refused too unless ``dc_extrapolation`` is set, in which case the
    response is anchored at DC with S(0) = Re(S(f_lowest)) to keep the
    extrapolated response real at DC.
    """
    grid = np.atleast_1d(np.asarray(grid_hz, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise ViaqualError("resample grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) <= 0):
        raise ViaqualError("resample grid must be strictly increasing")
    if grid[-1] > net.f_max_hz * (1 + 1e-12):
        raise ViaqualError(
            f"refusing to extrapolate above the measured band: requested "
            f"{grid[-1]:.6g} Hz > {net.f_max_hz:.6g} Hz"
        )
    f = net.frequencies_hz
    s = net.s
    if grid[0] < net.f_min_hz:
        if not dc_extrapolation:
            raise ViaqualError(
                f"requested {grid[0]:.6g} Hz below the measured band; "
                "enable dc_extrapolation to anchor the response at DC"
            )
        if grid[0] < 0:
            raise ViaqualError("resample grid must be >= 0")
        if f[0] > 0:
            f = np.concatenate(([0.0], f))
            s = np.concatenate((s[:1].real.astype(complex), s), axis=0)

    n = net.port_count
    out = np.empty((grid.size, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[:, i, j] = np.interp(grid, f, s[:, i, j].real) + 1j * np.interp(
                grid, f, s[:, i, j].imag
            )
    return SParameterNetwork(
        frequencies_hz=grid,
        s=out,
        reference_ohms=net.reference_ohms,
        source_format=net.source_format,
        comments=net.comments,
    )
