"""S-parameter network mathematics.

Wave-cascading (T) matrices, cascading, mixed-mode reduction, THRU
bisection de-embedding, and passivity checks.  The T-matrix convention
used throughout maps incident/reflected waves as

    [a1, b1]^T = T [b2, a2]^T,

    T = (1/S21) [[1, -S22], [S11, S12*S21 - S11*S22]],

normalized to the network's common reference impedance, so that the
T-matrix of a series connection is the product of the T-matrices.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, ViaqualError
from .touchstone import SParameterNetwork

log = logging.getLogger(__name__)

_S21_SINGULAR = 1e-15


@dataclass(frozen=True, eq=False)
class TransmissionMatrix:
    """Per-frequency 2x2 wave-cascading matrices."""

    frequencies_hz: np.ndarray
    t: np.ndarray
    reference_ohms: float = 50.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=complex)
        object.__setattr__(self, "t", t)
        object.__setattr__(
            self, "frequencies_hz", np.asarray(self.frequencies_hz, dtype=float)
        )
        if t.shape != (self.frequencies_hz.size, 2, 2):
            raise ViaqualError(f"T data must have shape (F, 2, 2), got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ViaqualError("T data contains non-finite entries")


@dataclass(frozen=True)
class PortMap:
    """Differential pair assignment for a 4-port network, 1-based indices."""

    pair_a: tuple[int, int] = (1, 3)
    pair_b: tuple[int, int] = (2, 4)

    def __post_init__(self):
        ports = (*self.pair_a, *self.pair_b)
        if sorted(ports) != [1, 2, 3, 4]:
            raise ViaqualError(
                f"port map must use each of ports 1..4 exactly once, got {ports}"
            )


@dataclass(frozen=True, eq=False)
class MixedModeNetwork:
    """Differential/common mode blocks of a 4-port network.

    Each block is a 2-port on the source grid.  The blocks come from the
    orthonormal (1,-1)/sqrt(2), (1,1)/sqrt(2) basis change, so power sums
    are preserved; differential quantities are implicitly referenced to
    twice the single-ended impedance.
    """

    sdd: SParameterNetwork
    sdc: SParameterNetwork
    scd: SParameterNetwork
    scc: SParameterNetwork
    port_map: PortMap


@dataclass(frozen=True)
class PassivityReport:
    max_singular_value: float
    frequency_hz: float
    passive: bool
    tolerance: float = 1e-6


def require_two_port(net: SParameterNetwork, what: str = "operation") -> None:
    if net.port_count != 2:
        raise ViaqualError(f"{what} requires a 2-port network, got {net.port_count}")


def _check_same_grid(a: SParameterNetwork, b: SParameterNetwork) -> None:
    if a.frequencies_hz.shape != b.frequencies_hz.shape or not np.allclose(
        a.frequencies_hz, b.frequencies_hz, rtol=1e-12, atol=0.0
    ):
        raise GridMismatchError(
            "frequency grids differ; resample one network first "
            "(grids are never aligned silently)"
        )
    if not np.isclose(a.reference_ohms, b.reference_ohms, rtol=1e-12):
        raise GridMismatchError(
            f"reference impedances differ: {a.reference_ohms} vs {b.reference_ohms}"
        )


def s_to_t(net: SParameterNetwork) -> TransmissionMatrix:
    """Convert a 2-port to wave-cascading form. Requires S21 != 0 everywhere."""
    require_two_port(net, "s_to_t")
    s11 = net.s[:, 0, 0]
    s12 = net.s[:, 0, 1]
    s21 = net.s[:, 1, 0]
    s22 = net.s[:, 1, 1]
    bad = np.flatnonzero(np.abs(s21) < _S21_SINGULAR)
    if bad.size:
        f = net.frequencies_hz[bad[0]]
        raise ViaqualError(
            f"singular S-to-T conversion: |S21| < {_S21_SINGULAR:g} at {f:.6g} Hz"
        )
    t = np.empty_like(net.s)
    t[:, 0, 0] = 1.0 / s21
    t[:, 0, 1] = -s22 / s21
    t[:, 1, 0] = s11 / s21
    t[:, 1, 1] = (s12 * s21 - s11 * s22) / s21
    return TransmissionMatrix(
        frequencies_hz=net.frequencies_hz, t=t, reference_ohms=net.reference_ohms
    )


def t_to_s(tm: TransmissionMatrix) -> SParameterNetwork:
    """Inverse of :func:`s_to_t`."""
    t = tm.t
    t11 = t[:, 0, 0]
    bad = np.flatnonzero(np.abs(t11) < _S21_SINGULAR)
    if bad.size:
        f = tm.frequencies_hz[bad[0]]
        raise ViaqualError(
            f"singular T-to-S conversion: |T11| < {_S21_SINGULAR:g} at {f:.6g} Hz"
        )
    s = np.empty_like(t)
    det = t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]
    s[:, 0, 0] = t[:, 1, 0] / t11
    s[:, 0, 1] = det / t11
    s[:, 1, 0] = 1.0 / t11
    s[:, 1, 1] = -t[:, 0, 1] / t11
    return SParameterNetwork(
        frequencies_hz=tm.frequencies_hz, s=s, reference_ohms=tm.reference_ohms
    )


def flip(net: SParameterNetwork) -> SParameterNetwork:
    """Swap ports 1 and 2 of a 2-port network."""
    require_two_port(net, "flip")
    s = net.s[:, ::-1, ::-1].copy()
    return SParameterNetwork(
        frequencies_hz=net.frequencies_hz,
        s=s,
        reference_ohms=net.reference_ohms,
        source_format=net.source_format,
        comments=net.comments,
    )


def cascade(a: SParameterNetwork, b: SParameterNetwork) -> SParameterNetwork:
    """S-parameters of the series connection of two 2-ports (a then b)."""
    require_two_port(a, "cascade")
    require_two_port(b, "cascade")
    _check_same_grid(a, b)
    ta = s_to_t(a)
    tb = s_to_t(b)
    return t_to_s(
        TransmissionMatrix(
            frequencies_hz=a.frequencies_hz,
            t=np.matmul(ta.t, tb.t),
            reference_ohms=a.reference_ohms,
        )
    )


def chain(*nets: SParameterNetwork) -> SParameterNetwork:
    """Cascade several 2-ports left to right."""
    if not nets:
        raise ViaqualError("chain requires at least one network")
    out = nets[0]
    for net in nets[1:]:
        out = cascade(out, net)
    return out


def _mode_basis(port_map: PortMap) -> np.ndarray:
    m = np.zeros((4, 4))
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for row, (p_plus, p_minus), sign in (
        (0, port_map.pair_a, -1.0),
        (1, port_map.pair_b, -1.0),
        (2, port_map.pair_a, 1.0),
        (3, port_map.pair_b, 1.0),
    ):
        m[row, p_plus - 1] = inv_sqrt2
        m[row, p_minus - 1] = sign * inv_sqrt2
    return m


def single_ended_to_mixed_mode(
    net: SParameterNetwork, port_map: PortMap | None = None
) -> MixedModeNetwork:
    """Reduce a 4-port single-ended network to mixed-mode 2-port blocks."""
    if net.port_count != 4:
        raise ViaqualError(
            f"mixed-mode reduction requires a 4-port network, got {net.port_count}"
        )
    port_map = port_map or PortMap()
    m = _mode_basis(port_map)
    # m is real orthonormal, so the similarity transform is m S m^T.
    smm = np.einsum("ab,fbc,dc->fad", m, net.s, m)

    def block(rows, cols):
        return SParameterNetwork(
            frequencies_hz=net.frequencies_hz,
            s=smm[:, rows[0] : rows[1], cols[0] : cols[1]],
            reference_ohms=net.reference_ohms,
            comments=net.comments,
        )

    return MixedModeNetwork(
        sdd=block((0, 2), (0, 2)),
        sdc=block((0, 2), (2, 4)),
        scd=block((2, 4), (0, 2)),
        scc=block((2, 4), (2, 4)),
        port_map=port_map,
    )


def check_passivity(net: SParameterNetwork, tolerance: float = 1e-6) -> PassivityReport:
    """Largest singular value of S over frequency; flags values > 1 + tolerance."""
    sv = np.linalg.svd(net.s, compute_uv=False)
    worst = sv[:, 0]
    k = int(np.argmax(worst))
    value = float(worst[k])
    return PassivityReport(
        max_singular_value=value,
        frequency_hz=float(net.frequencies_hz[k]),
        passive=bool(value <= 1.0 + tolerance),
        tolerance=tolerance,
    )


_SYMMETRY_WARN = 0.02


def _track_eigensystem(t: np.ndarray, freqs: np.ndarray):
    """Eigendecompose T at every frequency with continuous eigenvalue tracks.

    Tracks are paired by eigenvector overlap with the previous frequency,
    not by eigenvalue proximity: the two eigenvalues of a line-like
    structure counter-rotate on the unit circle and repeatedly cross, but
    their eigenvectors stay apart, so vector overlap keeps each track on
    its own branch through the crossings.  Raises when no eigenbasis
    exists.
    """
    nf = t.shape[0]
    vals = np.empty((nf, 2), dtype=complex)
    vecs = np.empty((nf, 2, 2), dtype=complex)
    for k in range(nf):
        w, v = np.linalg.eig(t[k])
        if np.linalg.cond(v) > 1e12:
            raise ViaqualError(
                f"defective T-matrix (no usable eigenbasis) at "
                f"{freqs[k]:.6g} Hz; cannot take a matrix square root"
            )
        if k > 0:
            prev = vecs[k - 1]
            straight = abs(np.vdot(prev[:, 0], v[:, 0])) + abs(
                np.vdot(prev[:, 1], v[:, 1])
            )
            swapped = abs(np.vdot(prev[:, 0], v[:, 1])) + abs(
                np.vdot(prev[:, 1], v[:, 0])
            )
            if swapped > straight:
                w = w[::-1]
                v = v[:, ::-1]
        vals[k] = w
        vecs[k] = v
    return vals, vecs


def _half_matrices(vals, vecs, phase_offsets) -> np.ndarray:
    """Square roots of the tracked eigensystem with chosen branch offsets."""
    phases = np.unwrap(np.angle(vals), axis=0) + np.asarray(phase_offsets)
    roots = np.sqrt(np.abs(vals)) * np.exp(0.5j * phases)
    out = np.empty_like(vecs)
    for k in range(vecs.shape[0]):
        out[k] = vecs[k] @ np.diag(roots[k]) @ np.linalg.inv(vecs[k])
    return out


def _looks_physical(half: SParameterNetwork) -> tuple[bool, float]:
    """Score a bisection branch: passive and with non-negative delay.

    Returns (acceptable, badness); lower badness is better.
    """
    sv = np.linalg.svd(half.s, compute_uv=False)[:, 0]
    worst = float(sv.max())
    s21 = half.s[:, 1, 0]
    # Non-negative group delay: transmission phase must not rise with
    # frequency overall, and the low-frequency response sits near +1.
    phase = np.unwrap(np.angle(s21))
    slope = phase[-1] - phase[0] if phase.size > 1 else 0.0
    dc_ok = s21[0].real > 0
    acceptable = worst <= 1.0 + 1e-6 and slope <= 1e-9 and dc_ok
    badness = max(worst - 1.0, 0.0) + max(slope, 0.0) + (0.0 if dc_ok else 10.0)
    return acceptable, badness


def bisection_residual(net: SParameterNetwork, half: SParameterNetwork) -> float:
    """max |S(cascade(half, flip(half))) - S(net)| over all entries."""
    rebuilt = cascade(half, flip(half))
    return float(np.max(np.abs(rebuilt.s - net.s)))


def bisect_thru(
    net: SParameterNetwork, symmetry_tolerance: float = _SYMMETRY_WARN
) -> SParameterNetwork:
    """Split a symmetric reciprocal THRU into one mirrored half.

    The half is the matrix square root of the wave-cascading matrix,
    taken per frequency through the eigensystem.  The root branch is
    chosen to be passive with non-negative group delay at the lowest
    frequency and continued by phase unwrapping across the grid, so the
    result H satisfies cascade(H, flip(H)) == net up to the reported
    residual.
    """
    require_two_port(net, "bisect_thru")
    asym = float(np.max(np.abs(net.s[:, 0, 0] - net.s[:, 1, 1])))
    nonrecip = float(np.max(np.abs(net.s[:, 0, 1] - net.s[:, 1, 0])))
    if asym > symmetry_tolerance or nonrecip > symmetry_tolerance:
        warnings.warn(
            f"network is not symmetric/reciprocal to {symmetry_tolerance:g} "
            f"(max |S11-S22| = {asym:.3g}, max |S12-S21| = {nonrecip:.3g}); "
            "bisecting anyway",
            stacklevel=2,
        )

    tm = s_to_t(net)
    vals, vecs = _track_eigensystem(tm.t, net.frequencies_hz)

    chosen = None
    fallback: tuple[float, SParameterNetwork] | None = None
    # Four root branches: each eigenvalue's square root may carry an
    # extra half-turn.  Continuity fixes everything except this seed.
    for offsets in ((0, 0), (2 * np.pi, 0), (0, 2 * np.pi), (2 * np.pi, 2 * np.pi)):
        t_half = _half_matrices(vals, vecs, offsets)
        try:
            half = t_to_s(
                TransmissionMatrix(
                    frequencies_hz=net.frequencies_hz,
                    t=t_half,
                    reference_ohms=net.reference_ohms,
                )
            )
        except ViaqualError:
            continue
        acceptable, badness = _looks_physical(half)
        if acceptable:
            chosen = half
            break
        if fallback is None or badness < fallback[0]:
            fallback = (badness, half)

    if chosen is None:
        if fallback is None:
            raise ViaqualError(
                "bisection branch ambiguity: no square-root branch yields a "
                "usable half network"
            )
        warnings.warn(
            "no bisection branch is simultaneously passive and causal; "
            "returning the least-bad branch",
            stacklevel=2,
        )
        chosen = fallback[1]

    residual = bisection_residual(net, chosen)
    log.info("bisection residual: max |dS| = %.3e", residual)
    return chosen
