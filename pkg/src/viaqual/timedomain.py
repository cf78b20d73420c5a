"""Time-domain analysis of S-parameter channels.

Pulse and reflected-pulse responses, TDR impedance profiles, PRBS eye
synthesis by discrete Fourier series, 2-tap feed-forward equalization,
and the eye-closure metric.  The symbol rate is 56 Gbaud throughout
(28 GHz Nyquist); the unit interval is 1/56e9 s.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BandwidthError, ViaqualError
from .touchstone import SParameterNetwork

log = logging.getLogger(__name__)

BAUD_RATE_HZ = 56e9
UI_PS = 1e12 / BAUD_RATE_HZ
DEFAULT_EDGE_PS = 6.0
_RHO_CLAMP = 0.999


@dataclass(frozen=True)
class PulseSpec:
    """Single symbol-width test pulse with sinusoidal (half-cosine) edges."""

    width_ps: float = 18.0
    edge_ps: float = 6.0
    amplitude_v: float = 1.0

    def __post_init__(self):
        if not self.width_ps >= self.edge_ps > 0:
            raise ViaqualError("pulse requires width_ps >= edge_ps > 0")


@dataclass(frozen=True, eq=False)
class Waveform:
    t0_ps: float
    dt_ps: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.dt_ps <= 0:
            raise ViaqualError("dt_ps must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ViaqualError("waveform contains non-finite samples")

    @property
    def time_ps(self) -> np.ndarray:
        return self.t0_ps + self.dt_ps * np.arange(self.samples.size)

    def energy(self) -> float:
        """Sum of squared samples times dt (V^2 * ps)."""
        return float(np.sum(self.samples**2) * self.dt_ps)


@dataclass(frozen=True, eq=False)
class EyeDiagram:
    """Inner-eye contours folded modulo one unit interval.

    ``upper_inner[p]`` is the minimum over all logic-1 trajectories at
    phase p/P of the UI; ``lower_inner[p]`` the maximum over logic-0
    trajectories.  Their difference is the inner opening, which can go
    negative for a closed eye.
    """

    ui_ps: float
    upper_inner: np.ndarray
    lower_inner: np.ndarray
    truncated_harmonics: int = 0

    def __post_init__(self):
        up = np.asarray(self.upper_inner, dtype=float)
        lo = np.asarray(self.lower_inner, dtype=float)
        object.__setattr__(self, "upper_inner", up)
        object.__setattr__(self, "lower_inner", lo)
        if up.shape != lo.shape or up.ndim != 1:
            raise ViaqualError("contours must be 1-D arrays of equal length")
        if up.size < 32:
            raise ViaqualError("eye needs at least 32 phase samples per UI")
        if not (np.all(np.isfinite(up)) and np.all(np.isfinite(lo))):
            raise ViaqualError("eye contours contain non-finite values")

    @property
    def phases_per_ui(self) -> int:
        return self.upper_inner.size

    @property
    def phases_ui(self) -> np.ndarray:
        return np.arange(self.phases_per_ui) / self.phases_per_ui

    @property
    def opening_v(self) -> np.ndarray:
        return self.upper_inner - self.lower_inner

    @property
    def center_index(self) -> int:
        return int(np.argmax(self.opening_v))

    @property
    def inner_height_v(self) -> float:
        return float(self.opening_v[self.center_index])

    @property
    def inner_width_ui(self) -> float:
        """Fraction of the UI over which the opening stays positive,
        in the contiguous (circular) region containing the center."""
        open_mask = self.opening_v > 0
        if not open_mask[self.center_index]:
            return 0.0
        p = self.phases_per_ui
        count = 1
        k = (self.center_index + 1) % p
        while open_mask[k] and count < p:
            count += 1
            k = (k + 1) % p
        k = (self.center_index - 1) % p
        while open_mask[k] and count < p:
            count += 1
            k = (k - 1) % p
        return count / p


@dataclass(frozen=True)
class EyeMetrics:
    inner_height_v: float
    inner_width_ui: float
    eye_closure_mv_ui: float

    def __post_init__(self):
        if self.eye_closure_mv_ui < 0:
            raise ViaqualError("eye closure cannot be negative")


@dataclass(frozen=True)
class EqualizerTaps:
    """2-tap FIR filter, main + postcursor one UI apart, |c0| + |c1| = 1.

    Eyes rendered through the filter are referred to a unit main cursor
    (the response is scaled by 1/c0), so the stored normalization does not
    itself read as eye closure.
    """

    c0: float
    c1: float

    def __post_init__(self):
        if abs(abs(self.c0) + abs(self.c1) - 1.0) > 1e-9:
            raise ViaqualError("tap magnitudes must sum to 1")
        if self.c0 <= 0:
            raise ViaqualError("main tap must be positive")


@dataclass(frozen=True, eq=False)
class EqualizationResult:
    taps: EqualizerTaps
    eye: EyeDiagram
    closed: bool


def make_pulse(spec: PulseSpec, dt_ps: float, pad_ps: float = 0.0) -> Waveform:
    """Sample the test pulse: half-cosine rise, flat top, half-cosine fall.

    The full width at half maximum equals ``spec.width_ps`` because the
    half-amplitude points sit at the midpoints of the two edges.
    """
    if dt_ps > spec.edge_ps / 8:
        raise ViaqualError(
            f"dt_ps = {dt_ps:g} too coarse; need dt <= edge/8 = "
            f"{spec.edge_ps / 8:g} ps"
        )
    duration = spec.width_ps + spec.edge_ps + pad_ps
    t = np.arange(0.0, duration + dt_ps, dt_ps)
    v = np.zeros_like(t)
    rising = t < spec.edge_ps
    v[rising] = 0.5 * (1 - np.cos(np.pi * t[rising] / spec.edge_ps))
    flat = (t >= spec.edge_ps) & (t < spec.width_ps)
    v[flat] = 1.0
    falling = (t >= spec.width_ps) & (t < spec.width_ps + spec.edge_ps)
    v[falling] = 0.5 * (1 + np.cos(np.pi * (t[falling] - spec.width_ps) / spec.edge_ps))
    return Waveform(t0_ps=0.0, dt_ps=dt_ps, samples=spec.amplitude_v * v)


def _entry_with_dc(net: SParameterNetwork, i: int, j: int):
    """Frequency grid and S_ij samples with a real-valued DC anchor."""
    f = net.frequencies_hz
    s = net.s[:, i - 1, j - 1]
    if f[0] > 0:
        f = np.concatenate(([0.0], f))
        s = np.concatenate(([s[0].real + 0j], s))
    return f, s


def _sample_entry(net, f_target, i, j):
    """Interpolate S_ij onto arbitrary frequencies.

    Linear on real/imaginary parts, anchored at DC with a real value, and
    zero above the network's highest measured frequency (out-of-band
    content is treated as fully attenuated).
    """
    f, s = _entry_with_dc(net, i, j)
    out = np.interp(f_target, f, s.real, right=0.0) + 1j * np.interp(
        f_target, f, s.imag, right=0.0
    )
    return out


def _fit_group_delay_s(f_hz: np.ndarray, h: np.ndarray, weights: np.ndarray) -> float:
    """Weighted linear-phase slope of h; returns the delay in seconds."""
    total = weights.sum()
    if total <= 0.0 or f_hz.size < 2:
        return 0.0
    mag = np.abs(h)
    good = mag > 1e-12 * mag.max() if mag.max() > 0 else np.zeros(h.size, bool)
    if good.sum() < 2:
        return 0.0
    ang = np.angle(h)
    # Carry the last trustworthy angle through near-zero-magnitude points
    # so numerical noise cannot corrupt the unwrap.
    idx = np.where(good, np.arange(h.size), -1)
    idx = np.maximum.accumulate(idx)
    first = np.argmax(good)
    idx[idx < 0] = first
    phase = np.unwrap(ang[idx])
    w = np.where(good, weights, 0.0)
    omega = 2 * np.pi * f_hz
    wsum = w.sum()
    om = (w * omega).sum() / wsum
    ph = (w * phase).sum() / wsum
    denom = (w * (omega - om) ** 2).sum()
    if denom <= 0.0:
        return 0.0
    slope = (w * (omega - om) * (phase - ph)).sum() / denom
    return -slope


def _pulse_bandwidth_hz(f: np.ndarray, spectrum: np.ndarray, fraction=0.99) -> float:
    energy = np.abs(spectrum) ** 2
    cum = np.cumsum(energy)
    total = cum[-1]
    if total == 0:
        return 0.0
    k = int(np.searchsorted(cum, fraction * total))
    return float(f[min(k, f.size - 1)])


def _response(
    net: SParameterNetwork,
    pulse: Waveform,
    i: int,
    j: int,
    record_ps: float | None = None,
) -> Waveform:
    dt_s = pulse.dt_ps * 1e-12
    if record_ps is None:
        # Size the record to hold the channel's bulk delay plus ring-out.
        f_net, s_net = _entry_with_dc(net, i, j)
        tau = _fit_group_delay_s(f_net, s_net, np.abs(s_net) ** 2)
        extra_ps = 4.0 * abs(tau) * 1e12 + 1000.0
        n_min = pulse.samples.size + int(np.ceil(extra_ps / pulse.dt_ps))
    else:
        n_min = int(np.ceil(record_ps / pulse.dt_ps))
    n = 1 << max(int(np.ceil(np.log2(max(n_min, 2 * pulse.samples.size)))), 6)
    if n > 1 << 22:
        raise ViaqualError("response record would exceed 2^22 samples")

    f = np.fft.rfftfreq(n, dt_s)
    spectrum = np.fft.rfft(pulse.samples, n=n)
    f99 = _pulse_bandwidth_hz(f, spectrum)
    if f99 > net.f_max_hz:
        raise BandwidthError(
            f"model bandwidth {net.f_max_hz:.4g} Hz is below the stimulus "
            f"99%-energy bandwidth; extend the model to at least {f99:.4g} Hz"
        )
    h = _sample_entry(net, f, i, j)
    y = np.fft.irfft(spectrum * h, n=n)
    return Waveform(t0_ps=pulse.t0_ps, dt_ps=pulse.dt_ps, samples=y)


def through_response(
    net: SParameterNetwork, pulse: Waveform, record_ps: float | None = None
) -> Waveform:
    """Transmitted waveform: inverse transform of (pulse spectrum x S21)."""
    if net.port_count != 2:
        raise ViaqualError("through_response requires a 2-port network")
    return _response(net, pulse, 2, 1, record_ps=record_ps)


def reflected_response(
    net: SParameterNetwork, pulse: Waveform, record_ps: float | None = None
) -> Waveform:
    """Reflected waveform at port 1: pulse spectrum x S11."""
    if net.port_count not in (1, 2):
        raise ViaqualError("reflected_response requires a 1- or 2-port network")
    return _response(net, pulse, 1, 1, record_ps=record_ps)


def tdr(
    net: SParameterNetwork, rise_ps: float = 30.0, z_ref: float | None = None
) -> Waveform:
    """Impedance-versus-time profile from reflection data.

    Launches a unit step with a sinusoidal edge, accumulates the reflected
    edge response into the step reflection coefficient, and maps it to
    impedance; the coefficient is clamped to +/-0.999 near opens/shorts.
    """
    if net.port_count not in (1, 2):
        raise ViaqualError("tdr requires a 1- or 2-port network (port 1 is used)")
    min_rise_ps = 2e12 / net.f_max_hz
    if rise_ps < min_rise_ps:
        raise ViaqualError(
            f"rise time {rise_ps:g} ps too fast for the model bandwidth; "
            f"need >= 2/f_max = {min_rise_ps:.3g} ps"
        )
    z_ref = net.reference_ohms if z_ref is None else z_ref
    dt_ps = rise_ps / 16.0
    dt_s = dt_ps * 1e-12

    f_net, s_net = _entry_with_dc(net, 1, 1)
    tau = _fit_group_delay_s(f_net, s_net, np.abs(s_net) ** 2)
    span_ps = 4.0 * abs(tau) * 1e12 + 8.0 * rise_ps + 3000.0
    n = 1 << int(np.ceil(np.log2(span_ps / dt_ps)))
    if n > 1 << 22:
        raise ViaqualError("TDR record would exceed 2^22 samples")

    t = dt_ps * np.arange(n)
    step = np.where(
        t >= rise_ps, 1.0, 0.5 * (1 - np.cos(np.pi * np.minimum(t, rise_ps) / rise_ps))
    )
    kernel = np.diff(step, prepend=0.0)

    f = np.fft.rfftfreq(n, dt_s)
    h = _sample_entry(net, f, 1, 1)
    rho = np.cumsum(np.fft.irfft(np.fft.rfft(kernel) * h, n=n))
    if np.any(np.abs(rho) > _RHO_CLAMP):
        warnings.warn(
            "reflection coefficient at clamp; impedance profile enters an "
            "open/short region",
            stacklevel=2,
        )
        rho = np.clip(rho, -_RHO_CLAMP, _RHO_CLAMP)
    z = z_ref * (1 + rho) / (1 - rho)
    return Waveform(t0_ps=0.0, dt_ps=dt_ps, samples=z)


def prbs7(seed: int = 0x7F, length: int = 127) -> np.ndarray:
    """Maximal-length 2^7-1 PRBS from the x^7 + x^6 + 1 LFSR."""
    if not 0 < seed < 128:
        raise ViaqualError("seed must be a non-zero 7-bit value")
    if length < 1:
        raise ViaqualError("length must be >= 1")
    reg = seed
    out = np.empty(length, dtype=np.uint8)
    for k in range(length):
        out[k] = reg & 1
        feedback = ((reg >> 0) ^ (reg >> 1)) & 1
        reg = (reg >> 1) | (feedback << 6)
    return out


def nrz_waveform(
    bits,
    samples_per_ui: int,
    ui_ps: float = UI_PS,
    edge_ps: float = DEFAULT_EDGE_PS,
    amplitude_v: float = 1.0,
) -> np.ndarray:
    """One period of a repeating NRZ waveform with sinusoidal edges.

    Levels are 0 and ``amplitude_v``; transitions are half-cosines of
    width ``edge_ps`` centered on the UI boundaries, wrapping circularly.
    """
    b = np.asarray(bits, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ViaqualError("bit pattern must be a 1-D sequence of length >= 2")
    if not 0 < edge_ps <= ui_ps:
        raise ViaqualError("edge_ps must lie in (0, ui_ps]")
    p = samples_per_ui
    length = b.size
    e = edge_ps / ui_ps
    phase = (np.arange(length * p) % p) / p
    ui_index = np.arange(length * p) // p
    cur = b[ui_index]
    prev = b[(ui_index - 1) % length]
    nxt = b[(ui_index + 1) % length]

    level = cur.copy()
    early = phase < e / 2
    xi = 0.5 + phase[early] / e
    level[early] = prev[early] + (cur[early] - prev[early]) * 0.5 * (
        1 - np.cos(np.pi * xi)
    )
    late = phase > 1 - e / 2
    xi = (phase[late] - (1 - e / 2)) / e
    level[late] = cur[late] + (nxt[late] - cur[late]) * 0.5 * (1 - np.cos(np.pi * xi))
    return amplitude_v * level


class _EyeWorkspace:
    """Shared spectral state for repeatedly folding eyes of one channel."""

    def __init__(self, net, bits, ui_ps, phases_per_ui, edge_ps, amplitude_v):
        if phases_per_ui < 32:
            raise ViaqualError("phases_per_ui must be at least 32")
        self.bits = np.asarray(bits, dtype=np.uint8)
        if not (np.any(self.bits == 0) and np.any(self.bits == 1)):
            raise ViaqualError("bit pattern must contain both 0s and 1s")
        self.ui_ps = float(ui_ps)
        self.p = int(phases_per_ui)
        self.length = self.bits.size
        x = nrz_waveform(self.bits, self.p, ui_ps, edge_ps, amplitude_v)
        self.spectrum = np.fft.rfft(x)
        period_s = self.length * self.ui_ps * 1e-12
        self.f = np.arange(self.spectrum.size) / period_s
        self.in_band = self.f <= net.f_max_hz
        self.h_channel = np.where(self.in_band, _sample_entry(net, self.f, 2, 1), 0.0)
        self.truncated = int(np.count_nonzero(~self.in_band))
        if self.truncated:
            log.debug(
                "eye synthesis: %d harmonics above %.4g Hz truncated",
                self.truncated,
                net.f_max_hz,
            )

    def fold(self, taps: EqualizerTaps | None = None) -> EyeDiagram:
        h = self.h_channel
        if taps is not None:
            ui_s = self.ui_ps * 1e-12
            # Receive-referred rendering: divide by the main tap so the
            # eye is measured against a unit main cursor and the tap
            # amplitude normalization does not read as eye closure.
            h = h * (1.0 + (taps.c1 / taps.c0) * np.exp(-2j * np.pi * self.f * ui_s))
        # Remove the bulk (linear-phase) delay so the folded trajectories
        # line up with their source bits; residual distortion stays.
        weights = np.abs(self.spectrum * h) ** 2
        weights[0] = 0.0
        tau = _fit_group_delay_s(self.f, np.where(weights > 0, h, 0), weights)
        h = h * np.exp(2j * np.pi * self.f * tau)
        y = np.fft.irfft(self.spectrum * h, n=self.length * self.p)
        traj = y.reshape(self.length, self.p)
        upper = traj[self.bits == 1].min(axis=0)
        lower = traj[self.bits == 0].max(axis=0)
        return EyeDiagram(
            ui_ps=self.ui_ps,
            upper_inner=upper,
            lower_inner=lower,
            truncated_harmonics=self.truncated,
        )


def synthesize_eye(
    net: SParameterNetwork,
    bits,
    ui_ps: float = UI_PS,
    phases_per_ui: int = 64,
    edge_ps: float = DEFAULT_EDGE_PS,
    amplitude_v: float = 1.0,
    taps: EqualizerTaps | None = None,
    pattern_period: int | None = None,
) -> EyeDiagram:
    """Fold the channel's steady-state NRZ response into inner-eye contours.

    A repeating pattern has a discrete spectrum, so each harmonic is
    multiplied by S21 at that exact frequency (harmonics above the model's
    top frequency are treated as fully attenuated and counted).
    """
    bits = np.asarray(bits)
    if pattern_period is not None and bits.size % pattern_period != 0:
        raise ViaqualError(
            f"bit sequence length {bits.size} is not a whole number of "
            f"{pattern_period}-bit periods"
        )
    if net.port_count != 2:
        raise ViaqualError("eye synthesis requires a 2-port network")
    ws = _EyeWorkspace(net, bits, ui_ps, phases_per_ui, edge_ps, amplitude_v)
    return ws.fold(taps)


def optimize_2tap_ffe(
    net: SParameterNetwork,
    bits,
    ui_ps: float = UI_PS,
    phases_per_ui: int = 64,
    edge_ps: float = DEFAULT_EDGE_PS,
    amplitude_v: float = 1.0,
    c1_limit: float = -0.6,
    c1_step: float = 0.005,
) -> EqualizationResult:
    """Grid-search the postcursor tap that maximizes the inner eye height.

    Candidates satisfy |c0| + |c1| = 1 with c1 in [c1_limit, 0]; the
    unequalized (1, 0) filter is always in the search set, so equalization
    can never report a smaller opening than the raw channel.
    """
    if net.port_count != 2:
        raise ViaqualError("equalization requires a 2-port network")
    ws = _EyeWorkspace(net, bits, ui_ps, phases_per_ui, edge_ps, amplitude_v)
    best_taps = None
    best_eye = None
    best_height = -np.inf
    steps = int(round(abs(c1_limit) / c1_step))
    for k in range(steps + 1):
        c1 = -k * c1_step
        taps = EqualizerTaps(c0=1.0 - abs(c1), c1=c1)
        eye = ws.fold(taps)
        if eye.inner_height_v > best_height:
            best_height = eye.inner_height_v
            best_taps = taps
            best_eye = eye
    return EqualizationResult(
        taps=best_taps, eye=best_eye, closed=bool(best_height <= 0.0)
    )


def eye_closure(eye: EyeDiagram, reference: EyeDiagram) -> EyeMetrics:
    """Area by which the eye's inner opening falls short of the reference.

    closure = integral over one UI of max(0, O_ref - O) with negative
    openings clamped to zero, reported in mV*UI.  Height and width are
    those of the evaluated eye.
    """
    if eye.phases_per_ui != reference.phases_per_ui:
        raise ViaqualError("phase grids differ between eye and reference")
    if not np.isclose(eye.ui_ps, reference.ui_ps, rtol=1e-9):
        raise ViaqualError("unit intervals differ between eye and reference")
    o_eye = np.maximum(eye.opening_v, 0.0)
    o_ref = np.maximum(reference.opening_v, 0.0)
    shortfall = np.maximum(o_ref - o_eye, 0.0)
    closure_mv_ui = float(shortfall.mean() * 1e3)
    return EyeMetrics(
        inner_height_v=eye.inner_height_v,
        inner_width_ui=eye.inner_width_ui,
        eye_closure_mv_ui=closure_mv_ui,
    )
