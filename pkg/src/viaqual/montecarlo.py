"""Monte Carlo tolerance study of via eye closure in a lossy channel.

Samples manufacturing variations (layer shift, barrel diameter, trace
impedance with tracking antipad etch), builds the via + stripline channel
for each case, equalizes it, and reports the distribution of eye closures
against an acceptance threshold.  Everything is deterministic given the
master seed: case i draws from a child generator seeded with
splitmix64(master_seed XOR i), so results do not depend on worker count
or scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algebra import cascade
from .elements import (
    Layer,
    LineSpec,
    StackUp,
    ViaGeometry,
    line_spec_from_dict,
    stackup_from_dict,
    synth_lossy_stripline,
    synth_thru,
    synth_via,
    via_geometry_from_dict,
)
from .errors import ViaqualError
from .timedomain import UI_PS, eye_closure, optimize_2tap_ffe, prbs7


def splitmix64(x: int) -> int:
    """64-bit splitmix mix function; the child-seed derivation."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def default_stackup() -> StackUp:
    """12-metal-layer test stack: 4 mil dielectric between 0.7 mil copper."""
    layers = []
    for k in range(12):
        layers.append(Layer(name=f"L{k + 1}", thickness_mil=0.7, material="copper"))
        if k < 11:
            layers.append(
                Layer(name=f"D{k + 1}", thickness_mil=4.0, material="dielectric")
            )
    return StackUp(
        layers=tuple(layers),
        er_inplane=4.3,
        er_outofplane=3.6,
        metal_layers=tuple(range(0, 23, 2)),
    )


def default_geometry() -> ViaGeometry:
    """Breakout via: entry at the top, exit at metal 10, 2-layer stub."""
    pads = [0.0] * 12
    pads[0] = 14.0
    pads[9] = 12.0
    antipads = [24.0] * 12
    antipads[0] = 0.0
    antipads[9] = 0.0
    return ViaGeometry(
        drill_diameter=7.9,
        plated_od=8.0,
        wicking_depth=0.0,
        pad_diameter=tuple(pads),
        antipad_diameter=tuple(antipads),
        entry_layer=0,
        exit_layer=9,
        stub_span=2,
        layer_shift=(0.0, 0.0),
    )


@dataclass(frozen=True)
class McConfig:
    """Study definition: distributions, channel, base geometry, analysis knobs.

    All three varying parameters are uniform, matching the conservative
    screening assumption over Gaussian spreads.  The impedance sample also
    moves every antipad diameter by the same absolute etch delta
    (``etch_coeff_mil_per_ohm`` mils per ohm of differential impedance),
    since antipads and traces are etched in the same process step.
    """

    case_count: int = 99
    master_seed: int = 0x5EED_0001
    layer_shift_mil: tuple[float, float] = (0.0, 2.0)
    barrel_od_mil: tuple[float, float] = (8.0, 10.0)
    z_diff_ohm: tuple[float, float] = (93.0, 107.0)
    closure_threshold_mv_ui: float = 0.05
    channel: LineSpec = field(default_factory=LineSpec)
    geometry: ViaGeometry | None = field(default_factory=default_geometry)
    stackup: StackUp = field(default_factory=default_stackup)
    etch_coeff_mil_per_ohm: float = 0.25
    nominal_od_mil: float = 8.0
    nominal_z_ohm: float = 100.0
    f_max_hz: float = 60e9
    grid_points: int = 301
    phases_per_ui: int = 64
    edge_ps: float = 6.0
    reference_ohms: float = 50.0

    def __post_init__(self):
        if self.case_count < 1:
            raise ViaqualError("case_count must be >= 1")
        for name in ("layer_shift_mil", "barrel_od_mil", "z_diff_ohm"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ViaqualError(f"{name} range must be (low, high) with low <= high")

    def grid(self) -> np.ndarray:
        f0 = 1e12 / (127 * UI_PS)  # fundamental of the repeating pattern
        return np.linspace(f0 / 2, self.f_max_hz, self.grid_points)


@dataclass(frozen=True)
class CaseParams:
    case_id: int
    seed: int
    layer_shift_mil: float
    shift_angle_rad: float
    barrel_od_mil: float
    z_diff_ohm: float
    antipad_delta_mil: float


@dataclass(frozen=True)
class CaseResult:
    params: CaseParams
    closure_mv_ui: float


@dataclass(frozen=True, eq=False)
class McResult:
    per_case: tuple[CaseResult, ...]
    mean_mv_ui: float
    sigma_mv_ui: float | None
    three_sigma_limit_mv_ui: float | None
    nominal_closure_mv_ui: float
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    threshold_mv_ui: float
    passed: bool | None

    @property
    def closures(self) -> np.ndarray:
        return np.array([c.closure_mv_ui for c in self.per_case])


def sample_cases(cfg: McConfig) -> list[CaseParams]:
    """Deterministic per-case parameter draws.

    Case i uses numpy's PCG64 seeded with splitmix64(master_seed XOR i);
    the draw order is fixed: shift magnitude, shift angle, barrel OD,
    differential impedance.
    """
    cases = []
    for i in range(cfg.case_count):
        child = splitmix64((cfg.master_seed ^ i) & 0xFFFFFFFFFFFFFFFF)
        rng = np.random.Generator(np.random.PCG64(child))
        shift = rng.uniform(*cfg.layer_shift_mil)
        angle = rng.uniform(0.0, 2 * np.pi)
        od = rng.uniform(*cfg.barrel_od_mil)
        z = rng.uniform(*cfg.z_diff_ohm)
        delta = (z - cfg.nominal_z_ohm) * cfg.etch_coeff_mil_per_ohm
        cases.append(
            CaseParams(
                case_id=i,
                seed=child,
                layer_shift_mil=shift,
                shift_angle_rad=angle,
                barrel_od_mil=od,
                z_diff_ohm=z,
                antipad_delta_mil=delta,
            )
        )
    return cases


def _case_geometry(params: CaseParams, cfg: McConfig) -> ViaGeometry | None:
    if cfg.geometry is None:
        return None
    dx = params.layer_shift_mil * np.cos(params.shift_angle_rad)
    dy = params.layer_shift_mil * np.sin(params.shift_angle_rad)
    antipads = tuple(
        ap + params.antipad_delta_mil if ap > 0 else 0.0
        for ap in cfg.geometry.antipad_diameter
    )
    return replace(
        cfg.geometry,
        plated_od=params.barrel_od_mil,
        layer_shift=(float(dx), float(dy)),
        antipad_diameter=antipads,
    )


def run_case(params: CaseParams, cfg: McConfig) -> float:
    """Eye closure (mV*UI) of one sampled via in its lossy channel.

    The via network is chained to the end of the stripline, equalized,
    and compared against the independently equalized via-less channel.
    """
    grid = cfg.grid()
    line = synth_lossy_stripline(
        replace(cfg.channel, z_differential_ohm=params.z_diff_ohm),
        grid,
        reference_ohms=cfg.reference_ohms,
    )
    geom = _case_geometry(params, cfg)
    if geom is None:
        via = synth_thru(grid, reference_ohms=cfg.reference_ohms)
    else:
        via = synth_via(geom, cfg.stackup, grid, reference_ohms=cfg.reference_ohms)
    channel = cascade(line, via)

    bits = prbs7()
    eq_kwargs = dict(phases_per_ui=cfg.phases_per_ui, edge_ps=cfg.edge_ps)
    eq_via = optimize_2tap_ffe(channel, bits, **eq_kwargs)
    eq_ref = optimize_2tap_ffe(line, bits, **eq_kwargs)
    metrics = eye_closure(eq_via.eye, eq_ref.eye)
    return metrics.eye_closure_mv_ui


def _nominal_params(cfg: McConfig) -> CaseParams:
    return CaseParams(
        case_id=-1,
        seed=0,
        layer_shift_mil=0.0,
        shift_angle_rad=0.0,
        barrel_od_mil=cfg.nominal_od_mil,
        z_diff_ohm=cfg.nominal_z_ohm,
        antipad_delta_mil=0.0,
    )


def aggregate(
    case_results: list[CaseResult], cfg: McConfig, nominal_closure_mv_ui: float
) -> McResult:
    """Distribution statistics: sample mean/sigma, 3-sigma limit, histogram.

    With a single case the spread is undefined and reported as such; the
    pass flag then stays undecided rather than defaulting either way.
    """
    closures = np.array([c.closure_mv_ui for c in case_results])
    if closures.size == 0:
        raise ViaqualError("no cases to aggregate")
    mean = float(closures.mean())
    if closures.size >= 2:
        sigma = float(closures.std(ddof=1))
        limit = mean + 3.0 * sigma
        passed = bool(limit <= cfg.closure_threshold_mv_ui)
    else:
        sigma = None
        limit = None
        passed = None
    edges = np.histogram_bin_edges(closures, bins="fd")
    counts, _ = np.histogram(closures, bins=edges)
    return McResult(
        per_case=tuple(case_results),
        mean_mv_ui=mean,
        sigma_mv_ui=sigma,
        three_sigma_limit_mv_ui=limit,
        nominal_closure_mv_ui=nominal_closure_mv_ui,
        histogram_edges=edges,
        histogram_counts=counts,
        threshold_mv_ui=cfg.closure_threshold_mv_ui,
        passed=passed,
    )


def _run_case_tuple(args) -> CaseResult:
    params, cfg = args
    return CaseResult(params=params, closure_mv_ui=run_case(params, cfg))


def run_study(cfg: McConfig, jobs: int = 1, progress=None) -> McResult:
    """Sample, evaluate, and aggregate the full study.

    ``jobs`` > 1 distributes cases over processes; per-case child seeds
    make the outcome identical to a serial run.  ``progress`` is an
    optional callable invoked as progress(done, total).
    """
    cases = sample_cases(cfg)
    work = [(p, cfg) for p in cases]
    results: list[CaseResult] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for k, res in enumerate(pool.map(_run_case_tuple, work)):
                results.append(res)
                if progress:
                    progress(k + 1, len(work) + 1)
    else:
        for k, item in enumerate(work):
            results.append(_run_case_tuple(item))
            if progress:
                progress(k + 1, len(work) + 1)
    results.sort(key=lambda r: r.params.case_id)
    nominal = run_case(_nominal_params(cfg), cfg)
    if progress:
        progress(len(work) + 1, len(work) + 1)
    return aggregate(results, cfg, nominal_closure_mv_ui=nominal)


def rerun_with_shift(cfg: McConfig, new_shift_max_mil: float, jobs: int = 1) -> McResult:
    """Repeat the study with the layer-shift range widened to the new maximum.

    The master seed is reused so the two studies differ only through the
    shift distribution, making them directly comparable side by side.
    """
    cfg2 = replace(cfg, layer_shift_mil=(cfg.layer_shift_mil[0], new_shift_max_mil))
    return run_study(cfg2, jobs=jobs)


def shared_histogram(a: McResult, b: McResult) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rebin two studies onto common edges for side-by-side reporting."""
    both = np.concatenate([a.closures, b.closures])
    edges = np.histogram_bin_edges(both, bins="fd")
    counts_a, _ = np.histogram(a.closures, bins=edges)
    counts_b, _ = np.histogram(b.closures, bins=edges)
    return edges, counts_a, counts_b


# ---------------------------------------------------------------------------
# JSON interchange


def mc_config_from_dict(doc: dict) -> McConfig:
    kwargs: dict = {}
    for key in (
        "case_count",
        "master_seed",
        "closure_threshold_mv_ui",
        "etch_coeff_mil_per_ohm",
        "nominal_od_mil",
        "nominal_z_ohm",
        "f_max_hz",
        "grid_points",
        "phases_per_ui",
        "edge_ps",
        "reference_ohms",
    ):
        if key in doc:
            kwargs[key] = doc[key]
    for key in ("layer_shift_mil", "barrel_od_mil", "z_diff_ohm"):
        if key in doc:
            lo, hi = doc[key]
            kwargs[key] = (float(lo), float(hi))
    if "distribution" in doc and str(doc["distribution"]).lower() != "uniform":
        raise ViaqualError(
            f"only uniform parameter distributions are supported, got "
            f"{doc['distribution']!r}"
        )
    if "channel" in doc:
        kwargs["channel"] = line_spec_from_dict(doc["channel"])
    if "stackup" in doc:
        kwargs["stackup"] = stackup_from_dict(doc["stackup"])
    if "via" in doc:
        kwargs["geometry"] = via_geometry_from_dict(doc["via"])
    return McConfig(**kwargs)


def load_mc_config(source: str | Path | dict) -> McConfig:
    if isinstance(source, dict):
        return mc_config_from_dict(source)
    return mc_config_from_dict(json.loads(Path(source).read_text()))


def mc_result_to_dict(result: McResult) -> dict:
    return {
        "mean_mv_ui": result.mean_mv_ui,
        "sigma_mv_ui": result.sigma_mv_ui,
        "three_sigma_limit_mv_ui": result.three_sigma_limit_mv_ui,
        "nominal_closure_mv_ui": result.nominal_closure_mv_ui,
        "threshold_mv_ui": result.threshold_mv_ui,
        "passed": result.passed,
        "histogram": {
            "edges_mv_ui": result.histogram_edges.tolist(),
            "counts": result.histogram_counts.tolist(),
        },
        "per_case": [
            {
                "case_id": c.params.case_id,
                "seed": c.params.seed,
                "layer_shift_mil": c.params.layer_shift_mil,
                "shift_angle_rad": c.params.shift_angle_rad,
                "barrel_od_mil": c.params.barrel_od_mil,
                "z_diff_ohm": c.params.z_diff_ohm,
                "antipad_delta_mil": c.params.antipad_delta_mil,
                "closure_mv_ui": c.closure_mv_ui,
            }
            for c in result.per_case
        ],
    }
