"""Hypercubes over warehouse snapshots: build, roll up, drill down, slice, dice.

A cube groups additive measures by coordinates drawn from three dimensions:

    geography      level province | regency
    time           level year | month | day
    magnitude_band half-open bands [k*w, (k+1)*w) of width w

Measures are attributed where they happened: deaths, injured and damaged
buildings group by the casualty/damage row's own regency, while quake_count
and affected_area_km2 group by the quake's home regency (nearest centroid to
the epicenter). Time and magnitude always come from the parent quake. Cells
hold exact sums, so any partition of a dimension adds up to the grand total.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from .errors import ValidationError
from .model import QuakeEvent
from .warehouse import Snapshot

MEASURES = ("quake_count", "deaths", "injured", "damaged_buildings", "affected_area_km2")
GEOGRAPHY_LEVELS = ("province", "regency")
TIME_LEVELS = ("year", "month", "day")

_FINER = {("geography", "province"): "regency",
          ("time", "year"): "month",
          ("time", "month"): "day"}
_COARSER = {("geography", "regency"): "province",
            ("time", "day"): "month",
            ("time", "month"): "year"}


@dataclass(frozen=True, slots=True)
class Dimension:
    """One axis of a cube: geography/time carry a level, magnitude_band a width."""

    name: str
    level: str | None = None
    width: float | None = None

    def validate(self) -> None:
        if self.name == "geography":
            if self.level not in GEOGRAPHY_LEVELS:
                raise ValidationError(f"geography: level {self.level!r} not in {GEOGRAPHY_LEVELS}",
                                      "dimensions")
        elif self.name == "time":
            if self.level not in TIME_LEVELS:
                raise ValidationError(f"time: level {self.level!r} not in {TIME_LEVELS}",
                                      "dimensions")
        elif self.name == "magnitude_band":
            if not isinstance(self.width, (int, float)) or not self.width > 0:
                raise ValidationError("magnitude_band: width must be > 0", "dimensions")
        else:
            raise ValidationError(f"dimensions: unknown dimension {self.name!r}", "dimensions")


@dataclass(frozen=True, slots=True)
class DimFilter:
    """Keep only contributions whose coordinate at this dimension/level is allowed."""

    name: str
    level: str | None
    width: float | None
    values: frozenset[str]


@dataclass(frozen=True, slots=True)
class CubeSpec:
    measures: tuple[str, ...]
    dimensions: tuple[Dimension, ...] = ()
    filters: tuple[DimFilter, ...] = ()

    def validate(self) -> None:
        if not self.measures:
            raise ValidationError("measures: need at least one measure", "measures")
        for m in self.measures:
            if m not in MEASURES:
                raise ValidationError(f"measures: unknown measure {m!r}", "measures")
        if len(set(self.measures)) != len(self.measures):
            raise ValidationError("measures: duplicate measure", "measures")
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValidationError("dimensions: duplicate dimension", "dimensions")
        for d in self.dimensions:
            d.validate()
        for f in self.filters:
            Dimension(f.name, f.level, f.width).validate()
            if not f.values:
                raise ValidationError(f"filters: empty value set for {f.name}", "filters")

    def dimension(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise ValidationError(f"dimensions: {name!r} not in cube", "dimensions")


def magnitude_band(mag: float, width: float) -> str:
    """Half-open band label [k*w, (k+1)*w) containing mag."""
    k = math.floor(mag / width + 1e-9)
    lo, hi = k * width, (k + 1) * width
    return f"[{lo:g},{hi:g})"


def time_coord(quake: QuakeEvent, level: str) -> str:
    ts = quake.occurred_at
    if level == "year":
        return f"{ts.year:04d}"
    if level == "month":
        return f"{ts.year:04d}-{ts.month:02d}"
    return f"{ts.year:04d}-{ts.month:02d}-{ts.day:02d}"


class Hypercube:
    """Aggregated cells plus the context needed to keep navigating them."""

    def __init__(self, spec: CubeSpec, cells: dict[tuple[str, ...], dict[str, float]],
                 grand_total: dict[str, float], snapshot: Snapshot | None,
                 regency_province: dict[str, str]):
        self.spec = spec
        self.cells = cells
        self.grand_total = grand_total
        self.snapshot = snapshot
        self.regency_province = regency_province

    def sorted_cells(self) -> list[tuple[tuple[str, ...], dict[str, float]]]:
        return sorted(self.cells.items())

    def domain(self, name: str) -> set[str]:
        """Coordinate values present in the cube for one dimension."""
        idx = self._axis(name)
        return {coords[idx] for coords in self.cells}

    def _axis(self, name: str) -> int:
        for i, d in enumerate(self.spec.dimensions):
            if d.name == name:
                return i
        raise ValidationError(f"dimensions: {name!r} not in cube", "dimensions")


def _geo_value(regency_id: str, level: str, regency_province: dict[str, str]) -> str:
    return regency_id if level == "regency" else regency_province[regency_id]


def _contributions(snapshot: Snapshot, measure: str) -> Iterator[tuple[QuakeEvent, str | None, float]]:
    """(parent quake, attribution regency or None, amount) triples for one measure."""
    if measure in ("quake_count", "affected_area_km2"):
        for q in snapshot.quakes.values():
            value = 1 if measure == "quake_count" else q.affected_area_km2
            yield q, None, value
    elif measure in ("deaths", "injured"):
        kind = "dead" if measure == "deaths" else "injured"
        for (qid, rid, k), n in snapshot.casualty_counts().items():
            if k == kind:
                yield snapshot.quakes[qid], rid, n
    else:  # damaged_buildings
        for (qid, rid, _cat), n in snapshot.damage_counts().items():
            yield snapshot.quakes[qid], rid, n


def build_cube(snapshot: Snapshot, spec: CubeSpec) -> Hypercube:
    spec.validate()
    needs_geo = any(d.name == "geography" for d in spec.dimensions) or any(
        f.name == "geography" for f in spec.filters)
    if needs_geo and not snapshot.regencies and snapshot.quakes:
        raise ValidationError("geography: no regencies loaded", "dimensions")
    regency_province = {r.regency_id: r.province_id for r in snapshot.regencies.values()}

    def coord(dim: Dimension, quake: QuakeEvent, rid: str | None) -> str:
        if dim.name == "time":
            return time_coord(quake, dim.level or "year")
        if dim.name == "magnitude_band":
            return magnitude_band(quake.magnitude, dim.width or 1.0)
        attribution = rid if rid is not None else snapshot.home_regency(quake.quake_id)
        return _geo_value(attribution, dim.level or "regency", regency_province)

    cells: dict[tuple[str, ...], dict[str, float]] = {}
    grand_total = {m: 0 for m in spec.measures}
    for measure in spec.measures:
        for quake, rid, value in _contributions(snapshot, measure):
            if any(coord(Dimension(f.name, f.level, f.width), quake, rid) not in f.values
                   for f in spec.filters):
                continue
            key = tuple(coord(d, quake, rid) for d in spec.dimensions)
            cell = cells.setdefault(key, {m: 0 for m in spec.measures})
            cell[measure] += value
            grand_total[measure] += value
    return Hypercube(spec, cells, grand_total, snapshot, regency_province)


def rollup(cube: Hypercube, name: str) -> Hypercube:
    """Merge cells one level coarser (regency->province, day->month->year) or
    drop the dimension entirely when already at its coarsest level."""
    dim = cube.spec.dimension(name)
    idx = cube._axis(name)
    coarser = _COARSER.get((dim.name, dim.level or ""))

    def remap(coords: tuple[str, ...]) -> tuple[str, ...]:
        if coarser is None:
            return coords[:idx] + coords[idx + 1:]
        value = coords[idx]
        if dim.name == "geography":
            new = cube.regency_province[value]
        elif coarser == "month":
            new = value[:7]
        else:
            new = value[:4]
        return coords[:idx] + (new,) + coords[idx + 1:]

    cells: dict[tuple[str, ...], dict[str, float]] = {}
    for coords, vector in cube.cells.items():
        key = remap(coords)
        cell = cells.setdefault(key, {m: 0 for m in cube.spec.measures})
        for m, v in vector.items():
            cell[m] += v
    if coarser is None:
        dims = tuple(d for d in cube.spec.dimensions if d.name != name)
    else:
        dims = tuple(replace(d, level=coarser) if d.name == name else d
                     for d in cube.spec.dimensions)
    spec = replace(cube.spec, dimensions=dims)
    return Hypercube(spec, cells, dict(cube.grand_total), cube.snapshot, cube.regency_province)


def drilldown(cube: Hypercube, name: str) -> Hypercube:
    """Rebuild at one finer level (province->regency, year->month->day)."""
    dim = cube.spec.dimension(name)
    finer = _FINER.get((dim.name, dim.level or ""))
    if finer is None:
        raise ValidationError(f"{name}: already at finest level", "dimensions")
    if cube.snapshot is None:
        raise ValidationError("drilldown: cube carries no snapshot to refine from", "dimensions")
    dims = tuple(replace(d, level=finer) if d.name == name else d
                 for d in cube.spec.dimensions)
    return build_cube(cube.snapshot, replace(cube.spec, dimensions=dims))


def slice_cube(cube: Hypercube, name: str, value: str) -> Hypercube:
    """Fix one coordinate and remove the dimension; the restriction is kept as
    a filter so later drill-downs stay inside the slice."""
    dim = cube.spec.dimension(name)
    idx = cube._axis(name)
    if value not in cube.domain(name):
        raise ValidationError(f"{name}: value {value!r} not in cube domain", "filters")
    cells = {coords[:idx] + coords[idx + 1:]: dict(vector)
             for coords, vector in cube.cells.items() if coords[idx] == value}
    grand_total = {m: sum(v[m] for v in cells.values()) for m in cube.spec.measures}
    spec = replace(cube.spec,
                   dimensions=tuple(d for d in cube.spec.dimensions if d.name != name),
                   filters=cube.spec.filters + (
                       DimFilter(dim.name, dim.level, dim.width, frozenset({value})),))
    return Hypercube(spec, cells, grand_total, cube.snapshot, cube.regency_province)


def dice(cube: Hypercube, restrictions: dict[str, set[str]]) -> Hypercube:
    """Restrict to a Cartesian sub-box; dimensions stay in place."""
    axes = {}
    for name, values in restrictions.items():
        dim = cube.spec.dimension(name)
        if not values:
            raise ValidationError(f"{name}: empty value set", "filters")
        unknown = set(values) - cube.domain(name)
        if unknown:
            raise ValidationError(f"{name}: values {sorted(unknown)} not in cube domain", "filters")
        axes[cube._axis(name)] = (dim, frozenset(values))
    cells = {coords: dict(vector) for coords, vector in cube.cells.items()
             if all(coords[i] in vals for i, (_, vals) in axes.items())}
    grand_total = {m: sum(v[m] for v in cells.values()) for m in cube.spec.measures}
    filters = cube.spec.filters + tuple(
        DimFilter(dim.name, dim.level, dim.width, vals) for dim, vals in axes.values())
    return Hypercube(replace(cube.spec, filters=filters), cells, grand_total,
                     cube.snapshot, cube.regency_province)


def _dim_label(d: Dimension) -> str:
    if d.name == "magnitude_band":
        return f"magnitude_band:{d.width:g}"
    return f"{d.name}:{d.level}"


def render_report(cube: Hypercube, fmt: str = "text") -> str:
    """Serialize the cube deterministically as text, csv or json."""
    if fmt not in ("text", "csv", "json"):
        raise ValidationError(f"format: {fmt!r} not in ('text', 'csv', 'json')", "format")
    headers = [_dim_label(d) for d in cube.spec.dimensions] + list(cube.spec.measures)
    rows = [list(coords) + [vector[m] for m in cube.spec.measures]
            for coords, vector in cube.sorted_cells()]
    totals = [cube.grand_total[m] for m in cube.spec.measures]

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        for row in rows:
            writer.writerow(row)
        if rows and cube.spec.dimensions:
            pad = ["TOTAL"] + [""] * (len(cube.spec.dimensions) - 1)
            writer.writerow(pad + totals)
        return buf.getvalue()

    if fmt == "json":
        labels = [" / ".join(coords) if coords else "total" for coords, _ in cube.sorted_cells()]
        doc = {
            "measures": list(cube.spec.measures),
            "dimensions": [_dim_label(d) for d in cube.spec.dimensions],
            "cells": [{"coords": list(coords), "values": {m: vector[m] for m in cube.spec.measures}}
                      for coords, vector in cube.sorted_cells()],
            "grand_total": {m: cube.grand_total[m] for m in cube.spec.measures},
            "series": {
                "labels": labels,
                "datasets": [{"measure": m,
                              "values": [vector[m] for _, vector in cube.sorted_cells()]}
                             for m in cube.spec.measures],
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    if rows and cube.spec.dimensions:
        total_row = ["TOTAL"] + [""] * (len(cube.spec.dimensions) - 1) + [str(t) for t in totals]
        lines.append("  ".join(str(v).ljust(w) for v, w in zip(total_row, widths)))
    return "\n".join(lines) + "\n"


def parse_dimension(text: str) -> Dimension:
    """Parse CLI syntax: geography:province, time:year, magnitude_band:1.0."""
    name, _, arg = text.partition(":")
    if name == "magnitude_band":
        try:
            width = float(arg) if arg else 1.0
        except ValueError:
            raise ValidationError(f"magnitude_band: bad width {arg!r}", "dimensions") from None
        dim = Dimension(name, width=width)
    else:
        dim = Dimension(name, level=arg or None)
    dim.validate()
    return dim


def _infer_slice_filter(snapshot: Snapshot, name: str, value: str) -> DimFilter:
    """Pick the level a slice value speaks at: '2004' is a year, '2004-12' a
    month, a known province id the province level, a band label its width."""
    if name == "time":
        level = {4: "year", 7: "month", 10: "day"}.get(len(value))
        if level is None:
            raise ValidationError(f"time: cannot infer level from {value!r}", "filters")
        return DimFilter("time", level, None, frozenset({value}))
    if name == "geography":
        if value in snapshot.provinces:
            return DimFilter("geography", "province", None, frozenset({value}))
        if value in snapshot.regencies:
            return DimFilter("geography", "regency", None, frozenset({value}))
        raise ValidationError(f"geography: {value!r} is neither a province nor a regency",
                              "filters")
    if name == "magnitude_band":
        try:
            lo, hi = value.strip("[)").split(",")
            width = float(hi) - float(lo)
        except ValueError:
            raise ValidationError(f"magnitude_band: bad band label {value!r}", "filters") from None
        return DimFilter("magnitude_band", None, width, frozenset({value}))
    raise ValidationError(f"filters: unknown dimension {name!r}", "filters")


def run_query(snapshot: Snapshot, measures: Sequence[str], by: Sequence[str],
              slices: Sequence[str] = ()) -> Hypercube:
    """One-call query used by the CLI and the report endpoint.

    A slice cuts the built cube when its value speaks at the exact level of a
    grouped dimension; otherwise it becomes a build-time filter at the level
    its value implies (so slicing a province still works on a regency cube).
    """
    dims = tuple(parse_dimension(text) for text in by)
    filters: list[DimFilter] = []
    post: list[tuple[str, str]] = []
    for text in slices:
        name, _, value = text.partition(":")
        if not value:
            raise ValidationError(f"slice: expected name:value, got {text!r}", "filters")
        inferred = _infer_slice_filter(snapshot, name, value)
        grouped = next((d for d in dims if d.name == name), None)
        if grouped is not None and (grouped.level, grouped.width) == (
                inferred.level, inferred.width):
            post.append((name, value))
        else:
            filters.append(inferred)
    cube = build_cube(snapshot, CubeSpec(tuple(measures), dims, tuple(filters)))
    for name, value in post:
        cube = slice_cube(cube, name, value)
    return cube
