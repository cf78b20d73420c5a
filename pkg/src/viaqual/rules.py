"""Fabrication rules for high-speed vias: audits and fab-note emission.

Three rules guard the via features that drive 28 GHz electrical
performance: pad diameters as designed, bounded layer-to-layer shift,
and bounded copper wicking.  Limits use inclusive boundaries ("shall not
exceed" admits equality).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ViaqualError

PASS = "pass"
FAIL = "fail"
NOT_EVALUATED = "not evaluated"


@dataclass(frozen=True)
class ExtraRule:
    name: str
    limit: float
    unit: str


@dataclass(frozen=True)
class RuleSet:
    """Limits for the fabrication audit; all values in mils.

    Pad diameters "shall not be changed" operationally means a small
    measurement tolerance, since a literal zero allowance cannot be
    manufactured or verified.
    """

    pad_diameter_tolerance_mil: float = 0.5
    max_layer_shift_mil: float = 2.0
    max_wicking_mil: float = 1.0
    extra_rules: tuple[ExtraRule, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "extra_rules", tuple(self.extra_rules))
        for name in (
            "pad_diameter_tolerance_mil",
            "max_layer_shift_mil",
            "max_wicking_mil",
        ):
            if getattr(self, name) <= 0:
                raise ViaqualError(f"{name} must be > 0")
        for rule in self.extra_rules:
            if rule.limit <= 0:
                raise ViaqualError(f"extra rule {rule.name!r} limit must be > 0")


@dataclass(frozen=True)
class PadMeasurement:
    layer: str
    designed_mil: float
    measured_mil: float

    def __post_init__(self):
        if self.measured_mil < 0 or self.designed_mil < 0:
            raise ViaqualError("pad diameters must be >= 0")


@dataclass(frozen=True)
class GeometryAudit:
    """Measured cross-section data from a fabricated board.

    ``layer_shift_mil`` may be reported per layer or as a single maximum;
    the convention used is recorded in ``shift_basis``.  Missing sections
    (None) mark the corresponding rule "not evaluated".
    """

    pads: tuple[PadMeasurement, ...] | None = None
    layer_shift_mil: tuple[float, ...] | None = None
    wicking_mil: float | None = None
    vendor: str = ""
    lot: str = ""
    shift_basis: str = "per-layer"

    def __post_init__(self):
        if self.pads is not None:
            object.__setattr__(self, "pads", tuple(self.pads))
        if self.layer_shift_mil is not None:
            shifts = tuple(float(v) for v in self.layer_shift_mil)
            if any(v < 0 for v in shifts):
                raise ViaqualError("layer shifts must be >= 0")
            object.__setattr__(self, "layer_shift_mil", shifts)
        if self.wicking_mil is not None and self.wicking_mil < 0:
            raise ViaqualError("wicking depth must be >= 0")


@dataclass(frozen=True)
class RuleCheck:
    name: str
    status: str
    measured: float | None
    limit: float
    margin_mil: float | None

    @property
    def passed(self) -> bool:
        return self.status == PASS


@dataclass(frozen=True)
class RuleReport:
    rules: tuple[RuleCheck, ...]
    overall_pass: bool
    vendor: str = ""
    lot: str = ""


def check_rules(audit: GeometryAudit, rules: RuleSet | None = None) -> RuleReport:
    """Audit measured geometry against the rule set.

    Margins are signed (positive = headroom); equality with a limit
    passes.  A missing measurement renders its rule "not evaluated" and
    fails the overall audit, since compliance cannot be shown.
    """
    rules = rules or RuleSet()
    checks: list[RuleCheck] = []

    if audit.pads:
        worst = max(abs(p.measured_mil - p.designed_mil) for p in audit.pads)
        margin = rules.pad_diameter_tolerance_mil - worst
        checks.append(
            RuleCheck(
                name="pad diameters as designed",
                status=PASS if margin >= 0 else FAIL,
                measured=worst,
                limit=rules.pad_diameter_tolerance_mil,
                margin_mil=margin,
            )
        )
    else:
        checks.append(
            RuleCheck(
                name="pad diameters as designed",
                status=NOT_EVALUATED,
                measured=None,
                limit=rules.pad_diameter_tolerance_mil,
                margin_mil=None,
            )
        )

    if audit.layer_shift_mil:
        worst = max(audit.layer_shift_mil)
        margin = rules.max_layer_shift_mil - worst
        checks.append(
            RuleCheck(
                name="layer-to-layer shift",
                status=PASS if margin >= 0 else FAIL,
                measured=worst,
                limit=rules.max_layer_shift_mil,
                margin_mil=margin,
            )
        )
    else:
        checks.append(
            RuleCheck(
                name="layer-to-layer shift",
                status=NOT_EVALUATED,
                measured=None,
                limit=rules.max_layer_shift_mil,
                margin_mil=None,
            )
        )

    if audit.wicking_mil is not None:
        margin = rules.max_wicking_mil - audit.wicking_mil
        checks.append(
            RuleCheck(
                name="copper wicking depth",
                status=PASS if margin >= 0 else FAIL,
                measured=audit.wicking_mil,
                limit=rules.max_wicking_mil,
                margin_mil=margin,
            )
        )
    else:
        checks.append(
            RuleCheck(
                name="copper wicking depth",
                status=NOT_EVALUATED,
                measured=None,
                limit=rules.max_wicking_mil,
                margin_mil=None,
            )
        )

    overall = all(c.status == PASS for c in checks)
    return RuleReport(
        rules=tuple(checks), overall_pass=overall, vendor=audit.vendor, lot=audit.lot
    )


def emit_fab_notes(rules: RuleSet | None = None) -> str:
    """Fabrication-drawing note block with the configured limits.

    Formatting is stable: identical rule sets produce byte-identical
    text, so the notes can live under version control.
    """
    rules = rules or RuleSet()
    notes = [
        "HIGH-SPEED VIA FABRICATION NOTES",
        "1. VIA PAD DIAMETERS SHALL NOT BE CHANGED FROM THOSE AS DESIGNED "
        f"(VERIFICATION TOLERANCE {rules.pad_diameter_tolerance_mil:g} MIL).",
        "2. LAYER-TO-LAYER SHIFTING SHALL NOT EXCEED "
        f"{rules.max_layer_shift_mil:g} MILS FROM CENTER.",
        "3. COPPER WICKING ALONG GLASS FIBERS DURING VIA PLATING SHALL NOT "
        f"EXCEED {rules.max_wicking_mil:g} MIL IN DEPTH.",
    ]
    for k, extra in enumerate(rules.extra_rules, start=4):
        notes.append(
            f"{k}. {extra.name.upper()} SHALL NOT EXCEED "
            f"{extra.limit:g} {extra.unit.upper()}."
        )
    return "\n".join(notes) + "\n"


# ---------------------------------------------------------------------------
# JSON interchange


def audit_from_dict(doc: dict) -> GeometryAudit:
    pads = None
    if doc.get("pads") is not None:
        pads = tuple(
            PadMeasurement(
                layer=str(p.get("layer", f"L{k + 1}")),
                designed_mil=float(p["designed_mil"]),
                measured_mil=float(p["measured_mil"]),
            )
            for k, p in enumerate(doc["pads"])
        )
    shifts = doc.get("layer_shift_mil")
    if shifts is not None:
        if isinstance(shifts, (int, float)):
            shifts = (float(shifts),)
        else:
            shifts = tuple(float(v) for v in shifts)
    wicking = doc.get("wicking_mil")
    return GeometryAudit(
        pads=pads,
        layer_shift_mil=shifts,
        wicking_mil=None if wicking is None else float(wicking),
        vendor=str(doc.get("vendor", "")),
        lot=str(doc.get("lot", "")),
        shift_basis=str(doc.get("shift_basis", "per-layer")),
    )


def load_audit(source: str | Path | dict) -> GeometryAudit:
    if isinstance(source, dict):
        return audit_from_dict(source)
    return audit_from_dict(json.loads(Path(source).read_text()))


def rules_from_dict(doc: dict) -> RuleSet:
    extras = tuple(
        ExtraRule(name=str(e["name"]), limit=float(e["limit"]), unit=str(e["unit"]))
        for e in doc.get("extra_rules", [])
    )
    return RuleSet(
        pad_diameter_tolerance_mil=float(doc.get("pad_diameter_tolerance_mil", 0.5)),
        max_layer_shift_mil=float(doc.get("max_layer_shift_mil", 2.0)),
        max_wicking_mil=float(doc.get("max_wicking_mil", 1.0)),
        extra_rules=extras,
    )


def load_rules(source: str | Path | dict) -> RuleSet:
    if isinstance(source, dict):
        return rules_from_dict(source)
    return rules_from_dict(json.loads(Path(source).read_text()))


def report_to_dict(report: RuleReport) -> dict:
    return {
        "overall_pass": report.overall_pass,
        "vendor": report.vendor,
        "lot": report.lot,
        "rules": [
            {
                "name": c.name,
                "status": c.status,
                "measured": c.measured,
                "limit": c.limit,
                "margin_mil": c.margin_mil,
            }
            for c in report.rules
        ],
    }


def report_from_dict(doc: dict) -> RuleReport:
    return RuleReport(
        rules=tuple(
            RuleCheck(
                name=r["name"],
                status=r["status"],
                measured=r["measured"],
                limit=r["limit"],
                margin_mil=r["margin_mil"],
            )
            for r in doc["rules"]
        ),
        overall_pass=bool(doc["overall_pass"]),
        vendor=str(doc.get("vendor", "")),
        lot=str(doc.get("lot", "")),
    )


def report_to_text(report: RuleReport) -> str:
    lines = [f"via fabrication audit: {'PASS' if report.overall_pass else 'FAIL'}"]
    if report.vendor or report.lot:
        lines.append(f"  vendor: {report.vendor or '-'}  lot: {report.lot or '-'}")
    for c in report.rules:
        if c.status == NOT_EVALUATED:
            lines.append(f"  [{c.status}] {c.name} (limit {c.limit:g} mil)")
        else:
            lines.append(
                f"  [{c.status}] {c.name}: measured {c.measured:g} mil, "
                f"limit {c.limit:g} mil, margin {c.margin_mil:+g} mil"
            )
    return "\n".join(lines) + "\n"
