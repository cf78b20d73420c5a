"""Analytic S-parameter models for channel elements.

Provides the ideal thru, lumped shunt capacitor, lossy stripline, and a
quasi-static parametric model of a plated-through-hole via in a layer
stack.  The via model targets correct rank ordering and monotonic trends
over manufacturing parameters rather than absolute full-wave accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError, ViaqualError
from .touchstone import SParameterNetwork

C_LIGHT = 299792458.0
EPS0 = 8.8541878128e-12
MIL_TO_M = 25.4e-6

# Fringing multiplier on the parallel-plate pad capacitance estimate.
DEFAULT_PAD_FRINGING = 1.5


def _as_grid(grid_hz) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid_hz, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise ViaqualError("frequency grid must be a non-empty 1-D array")
    if np.any(grid < 0):
        raise ViaqualError("frequency grid must be >= 0")
    if np.any(np.diff(grid) <= 0):
        raise ViaqualError("frequency grid must be strictly increasing")
    return grid


def _two_port(grid, s11, s21, s12=None, s22=None, z0=50.0) -> SParameterNetwork:
    n = grid.size
    s = np.empty((n, 2, 2), dtype=complex)
    s[:, 0, 0] = s11
    s[:, 1, 0] = s21
    s[:, 0, 1] = s21 if s12 is None else s12
    s[:, 1, 1] = s11 if s22 is None else s22
    return SParameterNetwork(frequencies_hz=grid, s=s, reference_ohms=z0)


def synth_thru(grid_hz, reference_ohms: float = 50.0) -> SParameterNetwork:
    """Ideal transparent 2-port: S21 = 1, S11 = 0 at all frequencies."""
    grid = _as_grid(grid_hz)
    return _two_port(grid, 0.0, 1.0, z0=reference_ohms)


def synth_shunt_capacitor(
    c_farads: float, reference_ohms: float = 50.0, grid_hz=None
) -> SParameterNetwork:
    """Lumped shunt capacitor across a matched thru.

    With y = j*omega*C*z0, S11 = -y/(y + 2) and S21 = 2/(y + 2); the
    element is reciprocal, symmetric, and lossless.
    """
    if c_farads < 0:
        raise ViaqualError(f"capacitance must be >= 0, got {c_farads}")
    grid = _as_grid(grid_hz)
    y = 1j * 2 * np.pi * grid * c_farads * reference_ohms
    return _two_port(grid, -y / (y + 2), 2 / (y + 2), z0=reference_ohms)


# ---------------------------------------------------------------------------
# Lossy stripline


@dataclass(frozen=True)
class LineSpec:
    """Stripline segment pinned by its insertion loss at Nyquist.

    ``loss_partition`` is the fraction of the Nyquist-frequency loss
    attributed to conductor (sqrt-f) behavior; the rest scales linearly
    with frequency as dielectric loss.  ``er_eff`` only sets the bulk
    delay; it is not part of the loss model.
    """

    length_m: float = 0.1
    z_differential_ohm: float = 100.0
    il_at_nyquist_db: float = 15.0
    nyquist_hz: float = 28e9
    loss_partition: float = 1.0 / 3.0
    er_eff: float = 3.6

    def __post_init__(self):
        if self.length_m < 0:
            raise ViaqualError("line length must be >= 0")
        if self.il_at_nyquist_db < 0:
            raise ViaqualError("insertion loss must be >= 0 dB")
        if not 0.0 <= self.loss_partition <= 1.0:
            raise ViaqualError("loss_partition must lie in [0, 1]")
        if self.z_differential_ohm <= 0 or self.nyquist_hz <= 0:
            raise ViaqualError("impedance and Nyquist frequency must be positive")

    def attenuation_db(self, f_hz) -> np.ndarray:
        """Total attenuation in dB at the given frequencies.

        The conductor term scales as sqrt(f) and the dielectric term as f;
        their split is ``loss_partition`` and the sum equals
        ``il_at_nyquist_db`` exactly at ``nyquist_hz``.
        """
        ratio = np.asarray(f_hz, dtype=float) / self.nyquist_hz
        shape = self.loss_partition * np.sqrt(np.maximum(ratio, 0.0)) + (
            1.0 - self.loss_partition
        ) * ratio
        return self.il_at_nyquist_db * shape


def _minimum_phase_from_db(att_db_of, f_hi: float, n_half: int = 4096):
    """Minimum-phase radians matching a dB attenuation profile.

    Samples ``att_db_of(f)`` on a uniform grid [0, f_hi], mirrors it to an
    even spectrum, and folds the real cepstrum.  Returns (frequencies,
    phase): the causal (minimum-phase) companion of that magnitude.
    """
    f = np.linspace(0.0, f_hi, n_half + 1)
    ln_mag = -att_db_of(f) * (np.log(10.0) / 20.0)
    full = np.concatenate([ln_mag, ln_mag[-2:0:-1]])
    cep = np.fft.ifft(full).real
    folded = np.zeros_like(cep)
    folded[0] = cep[0]
    folded[1:n_half] = 2.0 * cep[1:n_half]
    folded[n_half] = cep[n_half]
    log_mp = np.fft.fft(folded)
    return f, log_mp.imag[: n_half + 1]


def synth_lossy_stripline(
    spec: LineSpec, grid_hz, reference_ohms: float = 50.0
) -> SParameterNetwork:
    """Single-ended equivalent of a lossy differential stripline.

    The equivalent line impedance is ``z_differential/2``.  Attenuation
    follows the spec's conductor/dielectric split and hits the insertion
    loss anchor exactly at the Nyquist frequency.  The transmission phase
    is a bulk delay plus the minimum-phase companion of the loss profile,
    so the response is causal rather than an ideal-delay approximation.
    """
    grid = _as_grid(grid_hz)
    att_db = spec.attenuation_db(grid)

    if spec.length_m == 0.0 or spec.il_at_nyquist_db == 0.0:
        phase_mp = np.zeros_like(grid)
    else:
        f_mp, mp = _minimum_phase_from_db(
            spec.attenuation_db, f_hi=2.0 * float(grid[-1])
        )
        phase_mp = np.interp(grid, f_mp, mp)

    tau = spec.length_m * np.sqrt(spec.er_eff) / C_LIGHT
    omega = 2 * np.pi * grid
    e_gamma = 10.0 ** (-att_db / 20.0) * np.exp(1j * (phase_mp - omega * tau))

    z_line = spec.z_differential_ohm / 2.0
    gamma0 = (z_line - reference_ohms) / (z_line + reference_ohms)
    e2 = e_gamma * e_gamma
    denom = 1.0 - gamma0 * gamma0 * e2
    s11 = gamma0 * (1.0 - e2) / denom
    s21 = (1.0 - gamma0 * gamma0) * e_gamma / denom
    return _two_port(grid, s11, s21, z0=reference_ohms)


# ---------------------------------------------------------------------------
# Stack-up and via geometry


@dataclass(frozen=True)
class Layer:
    name: str
    thickness_mil: float
    material: str = "dielectric"

    def __post_init__(self):
        if self.thickness_mil <= 0:
            raise ViaqualError(f"layer {self.name!r} thickness must be > 0")


@dataclass(frozen=True)
class StackUp:
    """Ordered physical layer stack with dielectric anisotropy.

    ``metal_layers`` are indices into ``layers`` marking copper; the
    spans between consecutive metal layers are the dielectric segments a
    via barrel traverses.
    """

    layers: tuple[Layer, ...]
    er_inplane: float = 4.3
    er_outofplane: float = 3.6
    metal_layers: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "metal_layers", tuple(self.metal_layers))
        if len(self.layers) < 2:
            raise ViaqualError("a stack-up needs at least 2 layers")
        if self.er_inplane <= 1 or self.er_outofplane <= 1:
            raise ViaqualError("relative permittivities must exceed 1")
        if len(self.metal_layers) < 2:
            raise ViaqualError("a stack-up needs at least 2 metal layers")
        if list(self.metal_layers) != sorted(set(self.metal_layers)):
            raise ViaqualError("metal layer indices must be ascending and unique")
        if self.metal_layers[0] < 0 or self.metal_layers[-1] >= len(self.layers):
            raise ViaqualError("metal layer index out of range")

    @property
    def metal_count(self) -> int:
        return len(self.metal_layers)

    def span_thickness_mil(self, metal_a: int, metal_b: int) -> float:
        """Dielectric thickness between two metal layers (by metal index)."""
        lo = self.metal_layers[metal_a]
        hi = self.metal_layers[metal_b]
        if lo > hi:
            lo, hi = hi, lo
        return sum(
            layer.thickness_mil
            for k, layer in enumerate(self.layers)
            if lo < k < hi and k not in self.metal_layers
        )


def effective_barrel_od(plated_od_mil: float, wicking_depth_mil: float) -> float:
    """Barrel outer diameter after copper wicking along glass fibers.

    Wicking extends the electrical barrel boundary outward on each side,
    so the effective diameter grows by twice the wicking depth.
    """
    if plated_od_mil < 0 or wicking_depth_mil < 0:
        raise ViaqualError("diameters and wicking depth must be >= 0")
    return plated_od_mil + 2.0 * wicking_depth_mil


def _normalize_shift(layer_shift, metal_count: int) -> np.ndarray:
    arr = np.asarray(layer_shift, dtype=float)
    if arr.ndim == 1:
        if arr.shape != (2,):
            raise ViaqualError("layer_shift must be (dx, dy) or a per-layer list")
        arr = np.tile(arr, (metal_count, 1))
    if arr.shape != (metal_count, 2):
        raise ViaqualError(
            f"layer_shift must have shape ({metal_count}, 2), got {arr.shape}"
        )
    return arr


@dataclass(frozen=True)
class ViaGeometry:
    """Parametric PTH via description; all linear dimensions in mils.

    ``pad_diameter`` and ``antipad_diameter`` are per metal layer (0
    means no pad / not a plane at that layer).  ``entry_layer``,
    ``exit_layer``, and ``stub_span`` index/count metal layers.
    ``layer_shift`` is a single rigid (dx, dy) offset or one per metal
    layer.
    """

    drill_diameter: float
    plated_od: float
    pad_diameter: tuple[float, ...]
    antipad_diameter: tuple[float, ...]
    entry_layer: int
    exit_layer: int
    wicking_depth: float = 0.0
    stub_span: int = 0
    layer_shift: tuple = (0.0, 0.0)
    pad_fringing: float = DEFAULT_PAD_FRINGING

    def __post_init__(self):
        object.__setattr__(self, "pad_diameter", tuple(self.pad_diameter))
        object.__setattr__(self, "antipad_diameter", tuple(self.antipad_diameter))
        if self.drill_diameter <= 0:
            raise ViaqualError("drill diameter must be > 0")
        if self.plated_od < self.drill_diameter:
            raise ViaqualError("plated OD cannot be smaller than the drill diameter")
        if self.wicking_depth < 0:
            raise ViaqualError("wicking depth must be >= 0")
        if self.stub_span < 0:
            raise ViaqualError("stub span must be >= 0")
        for d in self.pad_diameter:
            if d and d < self.drill_diameter:
                raise ViaqualError(
                    "pad diameters must be 0 (padless) or >= the drill diameter"
                )

    def shift_magnitudes(self, metal_count: int) -> np.ndarray:
        return np.hypot(*_normalize_shift(self.layer_shift, metal_count).T)


def _validate_via(geom: ViaGeometry, stack: StackUp) -> np.ndarray:
    m = stack.metal_count
    if len(geom.pad_diameter) != m or len(geom.antipad_diameter) != m:
        raise GeometryError(
            f"pad/antipad lists must have one entry per metal layer ({m})"
        )
    if not 0 <= geom.entry_layer < geom.exit_layer < m:
        raise GeometryError("entry/exit metal indices out of order or range")
    if geom.exit_layer + geom.stub_span >= m:
        raise GeometryError("stub span extends beyond the bottom metal layer")
    shifts = geom.shift_magnitudes(m)
    r_eff = effective_barrel_od(geom.plated_od, geom.wicking_depth) / 2.0
    for k in range(geom.entry_layer, geom.exit_layer + geom.stub_span + 1):
        ap = geom.antipad_diameter[k]
        if ap <= 0:
            continue
        r_clear = ap / 2.0 - shifts[k]
        if r_clear <= r_eff:
            raise GeometryError(
                f"via barrel touches the plane at metal layer {k}: clearance "
                f"radius {r_clear:.3f} mil <= barrel radius {r_eff:.3f} mil"
            )
    return shifts


def coax_impedance_ohm(r_clear_mil: float, r_barrel_mil: float, er: float) -> float:
    """Characteristic impedance of the barrel/antipad coaxial segment."""
    if r_clear_mil <= r_barrel_mil:
        raise GeometryError("clearance radius must exceed the barrel radius")
    return 60.0 / np.sqrt(er) * np.log(r_clear_mil / r_barrel_mil)


def _abcd_line(omega: np.ndarray, z_line: float, tau_s: float) -> np.ndarray:
    theta = omega * tau_s
    abcd = np.empty((omega.size, 2, 2), dtype=complex)
    abcd[:, 0, 0] = np.cos(theta)
    abcd[:, 0, 1] = 1j * z_line * np.sin(theta)
    abcd[:, 1, 0] = 1j * np.sin(theta) / z_line
    abcd[:, 1, 1] = np.cos(theta)
    return abcd


def _abcd_shunt(omega: np.ndarray, admittance: np.ndarray) -> np.ndarray:
    abcd = np.zeros((omega.size, 2, 2), dtype=complex)
    abcd[:, 0, 0] = 1.0
    abcd[:, 1, 1] = 1.0
    abcd[:, 1, 0] = admittance
    return abcd


def _abcd_to_s(abcd: np.ndarray, z0: float) -> np.ndarray:
    a = abcd[:, 0, 0]
    b = abcd[:, 0, 1] / z0
    c = abcd[:, 1, 0] * z0
    d = abcd[:, 1, 1]
    delta = a + b + c + d
    s = np.empty_like(abcd)
    s[:, 0, 0] = (a + b - c - d) / delta
    s[:, 0, 1] = 2.0 * (a * d - b * c) / delta
    s[:, 1, 0] = 2.0 / delta
    s[:, 1, 1] = (-a + b - c + d) / delta
    return s


def _span_clearance_mil(
    geom: ViaGeometry, shifts: np.ndarray, upper: int, lower: int
) -> float:
    """Clearance radius governing the coax span between two metal layers.

    Bounding plane layers rule; if neither bound is a plane, the tightest
    plane clearance along the whole via span is used as a conservative
    stand-in.
    """
    candidates = [
        geom.antipad_diameter[k] / 2.0 - shifts[k]
        for k in (upper, lower)
        if geom.antipad_diameter[k] > 0
    ]
    if candidates:
        return min(candidates)
    all_planes = [
        geom.antipad_diameter[k] / 2.0 - shifts[k]
        for k in range(geom.entry_layer, geom.exit_layer + geom.stub_span + 1)
        if geom.antipad_diameter[k] > 0
    ]
    if not all_planes:
        raise GeometryError(
            "via has no antipad on any traversed layer; cannot size the "
            "barrel coax segments"
        )
    return min(all_planes)


def _pad_capacitance_f(
    geom: ViaGeometry, stack: StackUp, metal_index: int
) -> float:
    """Pad-to-plane shunt capacitance at one metal layer, in farads."""
    d_pad = geom.pad_diameter[metal_index]
    if d_pad <= 0:
        return 0.0
    planes = [
        k
        for k in range(stack.metal_count)
        if geom.antipad_diameter[k] > 0 and k != metal_index
    ]
    if planes:
        gap_mil = min(
            stack.span_thickness_mil(metal_index, k) for k in planes
        )
    else:
        neighbors = [
            k for k in (metal_index - 1, metal_index + 1) if 0 <= k < stack.metal_count
        ]
        gap_mil = min(stack.span_thickness_mil(metal_index, k) for k in neighbors)
    gap_mil = max(gap_mil, 1e-6)
    area_term = (d_pad**2 - geom.drill_diameter**2) * MIL_TO_M
    return (
        geom.pad_fringing
        * stack.er_outofplane
        * EPS0
        * np.pi
        * area_term
        / (4.0 * gap_mil)
    )


def synth_via(
    geom: ViaGeometry,
    stack: StackUp,
    grid_hz,
    reference_ohms: float = 50.0,
) -> SParameterNetwork:
    """Quasi-static S-parameter model of a PTH via in a layer stack.

    The barrel is a cascade of coaxial segments (one per dielectric span
    between metal layers), padded layers contribute shunt capacitances,
    and any stub below the exit layer hangs at the exit node as an
    open-terminated segment chain.  Materials are lossless, so the model
    is reciprocal and passive by construction.
    """
    grid = _as_grid(grid_hz)
    omega = 2 * np.pi * grid
    shifts = _validate_via(geom, stack)
    r_barrel = effective_barrel_od(geom.plated_od, geom.wicking_depth) / 2.0
    sqrt_er_out = np.sqrt(stack.er_outofplane)

    def span_segment(upper: int, lower: int) -> np.ndarray:
        r_clear = _span_clearance_mil(geom, shifts, upper, lower)
        z_span = coax_impedance_ohm(r_clear, r_barrel, stack.er_inplane)
        tau = stack.span_thickness_mil(upper, lower) * MIL_TO_M * sqrt_er_out / C_LIGHT
        return z_span, tau

    # Stub admittance seen at the exit node, built upward from the open end.
    y_stub = np.zeros_like(omega, dtype=complex)
    for m in range(geom.exit_layer + geom.stub_span, geom.exit_layer, -1):
        c_pad = _pad_capacitance_f(geom, stack, m)
        y_stub = y_stub + 1j * omega * c_pad
        z_span, tau = span_segment(m - 1, m)
        t = np.tan(omega * tau)
        y_stub = (y_stub * z_span + 1j * t) / (z_span * (1.0 + 1j * y_stub * z_span * t))

    total = np.tile(np.eye(2, dtype=complex), (grid.size, 1, 1))
    for m in range(geom.entry_layer, geom.exit_layer + 1):
        c_pad = _pad_capacitance_f(geom, stack, m)
        if c_pad > 0:
            total = total @ _abcd_shunt(omega, 1j * omega * c_pad)
        if m < geom.exit_layer:
            z_span, tau = span_segment(m, m + 1)
            total = total @ _abcd_line(omega, z_span, tau)
    if geom.stub_span > 0:
        total = total @ _abcd_shunt(omega, y_stub)

    s = _abcd_to_s(total, reference_ohms)
    return SParameterNetwork(frequencies_hz=grid, s=s, reference_ohms=reference_ohms)


# ---------------------------------------------------------------------------
# JSON interchange

_EXPECTED_UNITS = {
    "geometry": ("mil",),
    "length": ("m", "meter", "meters"),
    "impedance": ("ohm", "ohms"),
    "frequency": ("hz",),
}


def _check_units(doc: dict) -> None:
    units = doc.get("units")
    if not isinstance(units, dict):
        raise ViaqualError("design document must carry an explicit 'units' block")
    for key, accepted in _EXPECTED_UNITS.items():
        if key in units and str(units[key]).lower() not in accepted:
            raise ViaqualError(
                f"unsupported unit for {key!r}: {units[key]!r} "
                f"(expected one of {accepted})"
            )


def stackup_from_dict(data: dict) -> StackUp:
    layers = tuple(
        Layer(
            name=str(entry["name"]),
            thickness_mil=float(entry["thickness"]),
            material=str(entry.get("material", "dielectric")),
        )
        for entry in data["layers"]
    )
    return StackUp(
        layers=layers,
        er_inplane=float(data.get("er_inplane", 4.3)),
        er_outofplane=float(data.get("er_outofplane", 3.6)),
        metal_layers=tuple(int(k) for k in data["metal_layers"]),
    )


def via_geometry_from_dict(data: dict) -> ViaGeometry:
    shift = data.get("layer_shift", (0.0, 0.0))
    if isinstance(shift, (list, tuple)) and shift and isinstance(shift[0], (list, tuple)):
        shift = tuple(tuple(float(v) for v in pair) for pair in shift)
    else:
        shift = tuple(float(v) for v in shift)
    return ViaGeometry(
        drill_diameter=float(data["drill_diameter"]),
        plated_od=float(data["plated_od"]),
        wicking_depth=float(data.get("wicking_depth", 0.0)),
        pad_diameter=tuple(float(v) for v in data["pad_diameter"]),
        antipad_diameter=tuple(float(v) for v in data["antipad_diameter"]),
        entry_layer=int(data["entry_layer"]),
        exit_layer=int(data["exit_layer"]),
        stub_span=int(data.get("stub_span", 0)),
        layer_shift=shift,
        pad_fringing=float(data.get("pad_fringing", DEFAULT_PAD_FRINGING)),
    )


def line_spec_from_dict(data: dict) -> LineSpec:
    return LineSpec(
        length_m=float(data.get("length", 0.1)),
        z_differential_ohm=float(data.get("z_differential", 100.0)),
        il_at_nyquist_db=float(data.get("il_at_nyquist", 15.0)),
        nyquist_hz=float(data.get("nyquist_hz", 28e9)),
        loss_partition=float(data.get("loss_partition", 1.0 / 3.0)),
        er_eff=float(data.get("er_eff", 3.6)),
    )


def load_design(source: str | Path | dict) -> dict:
    """Load a design document holding stack-up, via, and/or line sections.

    Returns a dict with whichever of ``stackup``, ``via``, ``line`` the
    document defines.  The document must declare its units explicitly.
    """
    if isinstance(source, dict):
        doc = source
    else:
        doc = json.loads(Path(source).read_text())
    _check_units(doc)
    out: dict = {}
    if "stackup" in doc:
        out["stackup"] = stackup_from_dict(doc["stackup"])
    if "via" in doc:
        out["via"] = via_geometry_from_dict(doc["via"])
    if "line" in doc:
        out["line"] = line_spec_from_dict(doc["line"])
    if not out:
        raise ViaqualError(
            "design document defines none of 'stackup', 'via', 'line'"
        )
    return out
