"""Broadband reflected voltage: return-loss hump line fit and inversion.

The BRV condenses a structure's dynamic return loss into a single dB
value at the Nyquist frequency: a straight line is fitted across the
return-loss humps and read off at Nyquist.  The inverse operation finds
the shunt capacitance whose single-pole reflection matches a given BRV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import ViaqualError
from .touchstone import SParameterNetwork

DEFAULT_PROMINENCE_DB = 3.0


@dataclass(frozen=True, eq=False)
class BrvResult:
    hump_frequencies_hz: np.ndarray
    hump_levels_db: np.ndarray
    line_slope_db_per_hz: float
    line_intercept_db: float
    brv_db_at_nyquist: float
    method: str  # "line_fit" or "envelope_fallback"

    def line_db(self, f_hz) -> np.ndarray:
        return self.line_intercept_db + self.line_slope_db_per_hz * np.asarray(
            f_hz, dtype=float
        )


def reflection_db(net: SParameterNetwork, port: int = 1) -> np.ndarray:
    """|S_pp| in dB with a -400 dB floor for numerically zero entries."""
    mag = np.abs(net.s[:, port - 1, port - 1])
    return 20.0 * np.log10(np.maximum(mag, 1e-20))


def extract_brv(
    frequencies_hz,
    reflection_db_curve,
    nyquist_hz: float = 28e9,
    band: tuple[float, float] | None = None,
    prominence_db: float = DEFAULT_PROMINENCE_DB,
) -> BrvResult:
    """Fit a line across the return-loss humps and evaluate it at Nyquist.

    Humps are local maxima of the dB curve with at least ``prominence_db``
    of prominence inside ``band`` (default 2 GHz to 1.25x Nyquist).  With
    fewer than two humps the curve level at Nyquist is reported directly
    (``envelope_fallback``).
    """
    f = np.asarray(frequencies_hz, dtype=float)
    db = np.asarray(reflection_db_curve, dtype=float)
    if f.shape != db.shape or f.ndim != 1 or f.size < 2:
        raise ViaqualError("reflection curve needs matching 1-D f/dB arrays")
    if band is None:
        band = (2e9, 1.25 * nyquist_hz)
    f_lo, f_hi = band
    mask = (f >= f_lo) & (f <= f_hi)
    if not np.any(mask):
        raise ViaqualError(
            f"hump search band ({f_lo:.3g}, {f_hi:.3g}) Hz contains no data"
        )

    peaks, _ = find_peaks(db[mask], prominence=prominence_db)
    f_band = f[mask]
    db_band = db[mask]
    hump_f = f_band[peaks]
    hump_db = db_band[peaks]

    if hump_f.size >= 2:
        slope, intercept = np.polyfit(hump_f, hump_db, 1)
        brv = intercept + slope * nyquist_hz
        method = "line_fit"
    else:
        brv = float(np.interp(nyquist_hz, f, db))
        slope = 0.0
        intercept = brv
        method = "envelope_fallback"

    return BrvResult(
        hump_frequencies_hz=hump_f,
        hump_levels_db=hump_db,
        line_slope_db_per_hz=float(slope),
        line_intercept_db=float(intercept),
        brv_db_at_nyquist=float(brv),
        method=method,
    )


def extract_brv_from_network(
    net: SParameterNetwork,
    nyquist_hz: float = 28e9,
    band: tuple[float, float] | None = None,
    prominence_db: float = DEFAULT_PROMINENCE_DB,
    port: int = 1,
) -> BrvResult:
    return extract_brv(
        net.frequencies_hz,
        reflection_db(net, port=port),
        nyquist_hz=nyquist_hz,
        band=band,
        prominence_db=prominence_db,
    )


def match_capacitor_to_brv(
    brv_db: float, nyquist_hz: float = 28e9, z0: float = 50.0
) -> float:
    """Shunt capacitance whose reflection magnitude equals the BRV at Nyquist.

    Solves omega*C*z0 / sqrt(4 + (omega*C*z0)^2) = 10^(brv/20); only
    defined for brv < 0 dB (a passive shunt capacitor cannot reflect
    everything).
    """
    if brv_db >= 0:
        raise ViaqualError(
            f"BRV must be negative for a passive shunt capacitor, got {brv_db:g} dB"
        )
    r = 10.0 ** (brv_db / 20.0)
    omega = 2 * np.pi * nyquist_hz
    return 2.0 * r / (omega * z0 * np.sqrt(1.0 - r * r))
