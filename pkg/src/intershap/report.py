"""Explanation reports (``report.json``) and force-plot SVGs."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .baselines import BaselineScores
from .coalitions import interaction_matrices
from .scores import GlobalExplanation, LocalExplanation, global_from_matrices, local_from_matrices

SCHEMA_VERSION = 1


@dataclass
class ForcePlotSpec:
    base: float
    segments: list[tuple[str, float]]
    final: float

    def __post_init__(self) -> None:
        values = [self.base, self.final, *(v for _, v in self.segments)]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("force plot values must be finite")
        self.segments = [(str(k), float(v)) for k, v in self.segments]

    def residual(self) -> float:
        return self.base + sum(v for _, v in self.segments) - self.final

    def to_dict(self) -> dict:
        return {"base": self.base, "segments": [[k, v] for k, v in self.segments], "final": self.final}

    @classmethod
    def from_dict(cls, d: dict) -> "ForcePlotSpec":
        return cls(d["base"], [(k, v) for k, v in d["segments"]], d["final"])


def force_plot_spec(values: np.ndarray, M: int) -> ForcePlotSpec:
    """Mean empty-coalition value, signed per-modality and interaction terms, mean full value."""
    mats = interaction_matrices(values, M)
    signed = mats.mean(axis=0)
    segments = [(f"M{i + 1}", float(signed[i, i])) for i in range(M)]
    segments.append(("I", float(signed.sum() - np.trace(signed))))
    return ForcePlotSpec(float(values[:, 0].mean()), segments, float(values[:, -1].mean()))


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".") if x else "0"


def render_force_plot(spec: ForcePlotSpec, title: str = "", width: int = 720) -> str:
    """Horizontal additive-arrow plot from the base value to the final value.

    Each segment is drawn from the running total to the running total plus
    its value; positive pushes are red and point right, negative are blue and
    point left. Numbers are embedded as ``data-*`` attributes.
    """
    ForcePlotSpec(spec.base, spec.segments, spec.final)  # re-validate
    points = [spec.base]
    for _, v in spec.segments:
        points.append(points[-1] + v)
    lo, hi = min(points + [spec.final]), max(points + [spec.final])
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.08 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    left, right = 40.0, width - 40.0

    def sx(x: float) -> float:
        return left + (x - lo) / (hi - lo) * (right - left)

    height = 150
    y0, bar = 60.0, 22.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" data-base="{spec.base!r}" data-final="{spec.final!r}">',
        f"<title>{escape(title or 'force plot')}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left:.2f}" y1="{y0 + bar + 14:.2f}" x2="{right:.2f}" y2="{y0 + bar + 14:.2f}" stroke="#888"/>',
    ]
    for k in range(6):
        x = lo + k * (hi - lo) / 5
        out.append(
            f'<text x="{sx(x):.2f}" y="{y0 + bar + 30:.2f}" font-size="10" text-anchor="middle" '
            f'fill="#555">{_fmt(x)}</text>'
        )
    cursor = spec.base
    for name, value in spec.segments:
        start, end = sx(cursor), sx(cursor + value)
        colour = "#ff0051" if value >= 0 else "#008bfb"
        tip = min(8.0, abs(end - start))
        if value >= 0:
            pts = [(start, y0), (end - tip, y0), (end, y0 + bar / 2), (end - tip, y0 + bar), (start, y0 + bar)]
        else:
            pts = [(start, y0), (end + tip, y0), (end, y0 + bar / 2), (end + tip, y0 + bar), (start, y0 + bar)]
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        out.append(
            f'<polygon class="segment" data-label="{escape(name)}" data-value="{value!r}" '
            f'points="{path}" fill="{colour}" fill-opacity="0.85" stroke="white"/>'
        )
        out.append(
            f'<text x="{(start + end) / 2:.2f}" y="{y0 - 6:.2f}" font-size="11" text-anchor="middle">'
            f"{escape(name)} {'+' if value >= 0 else ''}{_fmt(value)}</text>"
        )
        cursor += value
    if not spec.segments:
        out.append(f'<line x1="{sx(spec.base):.2f}" y1="{y0 + bar / 2:.2f}" x2="{sx(spec.final):.2f}" '
                   f'y2="{y0 + bar / 2:.2f}" stroke="#444" stroke-width="2"/>')
    for label, x, anchor in (("base", spec.base, "end"), ("f(x)", spec.final, "start")):
        out.append(
            f'<line x1="{sx(x):.2f}" y1="{y0 - 20:.2f}" x2="{sx(x):.2f}" y2="{y0 + bar + 14:.2f}" '
            f'stroke="#333" stroke-dasharray="3,2"/>'
        )
        out.append(
            f'<text x="{sx(x):.2f}" y="{y0 - 24:.2f}" font-size="11" text-anchor="{anchor}" '
            f'font-weight="bold">{label} = {_fmt(x)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_force_plot(svg: str) -> ForcePlotSpec:
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    segs = [(p.get("data-label"), float(p.get("data-value"))) for p in root.iter(f"{ns}polygon")]
    return ForcePlotSpec(float(root.get("data-base")), segs, float(root.get("data-final")))


@dataclass
class ExplanationReport:
    global_: GlobalExplanation
    local: LocalExplanation
    force_plot: ForcePlotSpec
    by_predicted_class: dict[int, GlobalExplanation] = field(default_factory=dict)
    class_force_plots: dict[int, ForcePlotSpec] = field(default_factory=dict)
    class_counts: dict[int, int] = field(default_factory=dict)
    baselines: BaselineScores | None = None
    provenance: dict = field(default_factory=dict)
    created: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "created": self.created,
            "provenance": self.provenance,
            "global": self.global_.to_dict(),
            "local": self.local.to_dict(),
            "force_plot": self.force_plot.to_dict(),
            "by_predicted_class": {
                str(c): {
                    "sample_count": self.class_counts.get(c, e.sample_count),
                    "global": e.to_dict(),
                    "force_plot": self.class_force_plots[c].to_dict() if c in self.class_force_plots else None,
                }
                for c, e in sorted(self.by_predicted_class.items())
            },
            "baselines": None if self.baselines is None else self.baselines.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExplanationReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        by_class, plots, counts = {}, {}, {}
        for key, entry in d.get("by_predicted_class", {}).items():
            c = int(key)
            by_class[c] = GlobalExplanation.from_dict(entry["global"])
            counts[c] = entry["sample_count"]
            if entry.get("force_plot") is not None:
                plots[c] = ForcePlotSpec.from_dict(entry["force_plot"])
        baselines = d.get("baselines")
        return cls(
            global_=GlobalExplanation.from_dict(d["global"]),
            local=LocalExplanation.from_dict(d["local"]),
            force_plot=ForcePlotSpec.from_dict(d["force_plot"]),
            by_predicted_class=by_class,
            class_force_plots=plots,
            class_counts=counts,
            baselines=None if baselines is None else BaselineScores(**baselines),
            provenance=d.get("provenance", {}),
            created=d.get("created", ""),
        )

    def to_json(self) -> str:
        # json emits the shortest repr that round-trips each float exactly
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExplanationReport":
        return cls.from_dict(json.loads(text))


def build_report(
    values: np.ndarray,
    anchor: Sequence[int],
    M: int,
    provenance: dict | None = None,
    baselines: BaselineScores | None = None,
    timestamp: str | None = None,
) -> ExplanationReport:
    """Assemble the full report from stacked game values ``(N, 2**M)`` and anchored classes."""
    values = np.asarray(values, dtype=np.float64)
    anchor = np.asarray(anchor, dtype=np.int64)
    mats = interaction_matrices(values, M)
    by_class, plots, counts = {}, {}, {}
    for c in np.unique(anchor):
        sel = anchor == c
        by_class[int(c)] = global_from_matrices(mats[sel])
        plots[int(c)] = force_plot_spec(values[sel], M)
        counts[int(c)] = int(sel.sum())
    return ExplanationReport(
        global_=global_from_matrices(mats),
        local=local_from_matrices(mats),
        force_plot=force_plot_spec(values, M),
        by_predicted_class=by_class,
        class_force_plots=plots,
        class_counts=counts,
        baselines=baselines,
        provenance=provenance or {},
        created=timestamp if timestamp is not None else datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
