"""Parameter sweeps over stack geometry and pump wavelength, and optimum finding."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .materials import MaterialLibrary
from .nonlinear import NoNonlinearLayerError, shg_intensity
from .stack import Layer, LayerStack, monolayer_count_for

HBN_THICKNESS = "hbn_thickness"
SIO2_THICKNESS = "sio2_thickness"
PUMP_WAVELENGTH = "pump_wavelength"
AXES = (HBN_THICKNESS, SIO2_THICKNESS, PUMP_WAVELENGTH)
DEFAULT_PROMINENCE = 0.05
CHANNELS = ("total", "dip", "quad", "int")


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str
    values: np.ndarray
    unit: str = "nm"

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size == 0:
            raise SweepError(f"axis {self.name!r} is empty")
        if v.size > 1 and not np.all(np.diff(v) > 0):
            raise SweepError(f"axis {self.name!r} grid must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_dict(self) -> dict:
        return {"name": self.name, "unit": self.unit, "values": self.values.tolist()}


@dataclass(frozen=True)
class SweepTemplate:
    """A stack plus the roles of its layers for thickness sweeps.

    ``nonlinear_index`` and ``spacer_index`` default to the first nonlinear
    layer and the first SiO2 layer. A spacer thickness of zero removes the
    spacer layer; a flake thickness of zero removes every source.
    """

    stack: LayerStack
    pump_nm: float = 890.0
    parity: str | None = None
    nonlinear_index: int | None = None
    spacer_index: int | None = None
    channel: str = "total"

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise SweepError(f"channel must be one of {CHANNELS}")

    def flake_index(self) -> int:
        if self.nonlinear_index is not None:
            return self.nonlinear_index
        idx = self.stack.nonlinear_layers()
        if not idx:
            raise SweepError("template has no nonlinear layer to resize")
        return idx[0]

    def spacer(self) -> int:
        if self.spacer_index is not None:
            return self.spacer_index
        for i, layer in enumerate(self.stack.layers):
            if layer.material_name == "SiO2":
                return i
        raise SweepError("template has no SiO2 spacer layer")

    def to_dict(self) -> dict:
        return {"stack": self.stack.to_dict(), "pump_nm": self.pump_nm, "parity": self.parity,
                "nonlinear_index": self.nonlinear_index, "spacer_index": self.spacer_index,
                "channel": self.channel}


def _resized(layer: Layer, thickness_nm: float, parity: str | None) -> Layer:
    nl = layer.nonlinear
    if nl is None:
        raise SweepError(f"layer {layer.material_name!r} is not nonlinear")
    count = monolayer_count_for(thickness_nm, nl.monolayer_thickness_nm, parity)
    spec = replace(nl, monolayer_count=count)
    return Layer(layer.material_name, count * nl.monolayer_thickness_nm, spec)


def configure(template: SweepTemplate, point: dict[str, float]) -> tuple[LayerStack | None, float]:
    """Stack and pump wavelength for one grid point (stack None if no flake remains)."""
    stack = template.stack
    pump = template.pump_nm
    layers: list[Layer | None] = list(stack.layers)
    if HBN_THICKNESS in point:
        i = template.flake_index()
        t = point[HBN_THICKNESS]
        if t <= 0:
            return None, pump
        layers[i] = _resized(stack.layers[i], t, template.parity)
    elif template.parity is not None:
        idx = stack.nonlinear_layers()
        if idx:
            layers[idx[0]] = _resized(stack.layers[idx[0]], stack.layers[idx[0]].thickness_nm, template.parity)
    if SIO2_THICKNESS in point:
        i = template.spacer()
        t = point[SIO2_THICKNESS]
        if t < 0:
            raise SweepError("spacer thickness must be >= 0")
        layers[i] = Layer(stack.layers[i].material_name, t) if t > 0 else None
    if PUMP_WAVELENGTH in point:
        pump = point[PUMP_WAVELENGTH]
    return replace(stack, layers=tuple(l for l in layers if l is not None)), pump


def evaluate_point(template: SweepTemplate, lib: MaterialLibrary, point: dict[str, float]) -> float:
    stack, pump = configure(template, point)
    if stack is None:
        return 0.0
    try:
        return getattr(shg_intensity(stack, lib, pump), f"intensity_{template.channel}")
    except NoNonlinearLayerError:
        return 0.0


@dataclass(frozen=True)
class SweepResult:
    axes: tuple[Axis, ...]
    intensity: np.ndarray
    metadata: dict = field(default_factory=dict)
    flagged: np.ndarray | None = None   # points with no defined value (NaN in intensity)

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(axes) not in (1, 2):
            raise SweepError("sweeps have one or two axes")
        shape = tuple(a.values.size for a in axes)
        y = np.array(self.intensity, dtype=float).reshape(shape)
        flagged = np.zeros(shape, bool) if self.flagged is None else np.array(self.flagged, bool).reshape(shape)
        ok = y[~flagged]
        if not np.all(np.isfinite(ok)) or np.any(ok < 0):
            raise SweepError("intensity must be finite and >= 0 at unflagged points")
        y.setflags(write=False)
        flagged.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "intensity", y)
        object.__setattr__(self, "flagged", flagged)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def same_grid(self, other: "SweepResult") -> bool:
        return (self.ndim == other.ndim
                and all(a.name == b.name and np.array_equal(a.values, b.values)
                        for a, b in zip(self.axes, other.axes)))

    def to_csv(self, comment_lines: Sequence[str] = ()) -> str:
        lines = [f"# {c}" for c in comment_lines]
        lines.append("axis1,axis2,intensity")
        a1 = self.axes[0].values
        if self.ndim == 1:
            for x, y in zip(a1, self.intensity):
                lines.append(f"{x:.10g},,{y:.12g}")
        else:
            a2 = self.axes[1].values
            for i, x in enumerate(a1):
                for j, w in enumerate(a2):
                    lines.append(f"{x:.10g},{w:.10g},{self.intensity[i, j]:.12g}")
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {"axes": [{"name": a.name, "unit": a.unit, "size": int(a.values.size)} for a in self.axes],
                "flagged_points": int(self.flagged.sum()),
                "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2, sort_keys=True)


def _check_axis(name: str) -> None:
    if name not in AXES:
        raise SweepError(f"unknown sweep axis {name!r}; expected one of {AXES}")


def _eval_chunk(args) -> list[float]:
    template, lib, points = args
    return [evaluate_point(template, lib, p) for p in points]


def _evaluate(template, lib, points: list[dict], workers: int) -> np.ndarray:
    if workers <= 1 or len(points) < 2:
        return np.array(_eval_chunk((template, lib, points)), dtype=float)
    n_chunks = min(len(points), workers * 4)
    bounds = np.linspace(0, len(points), n_chunks + 1).astype(int)
    chunks = [(template, lib, points[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_eval_chunk, chunks))   # map keeps submission order
    return np.array([v for part in parts for v in part], dtype=float)


def sweep_1d(template: SweepTemplate, lib: MaterialLibrary, axis: str, grid, workers: int = 1) -> SweepResult:
    _check_axis(axis)
    ax = Axis(axis, grid)
    points = [{axis: float(v)} for v in ax.values]
    y = _evaluate(template, lib, points, workers)
    return SweepResult((ax,), y, {"template": template.to_dict()})


def sweep_2d(template: SweepTemplate, lib: MaterialLibrary, axis_a: str, axis_b: str, grid_a, grid_b,
             workers: int = 1) -> SweepResult:
    _check_axis(axis_a)
    _check_axis(axis_b)
    if axis_a == axis_b:
        raise SweepError("the two sweep axes must differ")
    a, b = Axis(axis_a, grid_a), Axis(axis_b, grid_b)
    points = [{axis_a: float(x), axis_b: float(w)} for x in a.values for w in b.values]
    y = _evaluate(template, lib, points, workers).reshape(a.values.size, b.values.size)
    return SweepResult((a, b), y, {"template": template.to_dict()})


def enhancement_map(numerator: SweepResult, denominator: SweepResult) -> SweepResult:
    """Pointwise ratio; points with a zero denominator are flagged (NaN) rather than infinite."""
    if not numerator.same_grid(denominator):
        raise SweepError("enhancement_map needs identical axes and grids")
    den = denominator.intensity
    flagged = (den <= 0) | numerator.flagged | denominator.flagged
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(flagged, np.nan, numerator.intensity / np.where(flagged, 1.0, den))
    meta = {"numerator": numerator.metadata, "denominator": denominator.metadata}
    return SweepResult(numerator.axes, ratio, meta, flagged)


# --- optimum finding --------------------------------------------------------

@dataclass(frozen=True)
class Optimum:
    location: tuple[float, ...]
    refined_location: tuple[float, ...]
    value: float
    is_boundary: bool
    index: tuple[int, ...]
    prominence: float


def prominence_1d(y: np.ndarray, i: int) -> float:
    """Topographic prominence of y[i]; a missing side (array end) is ignored."""
    y = np.asarray(y, float)
    h = y[i]
    bases = []
    for side in (y[:i][::-1], y[i + 1:]):
        if side.size == 0:
            continue
        higher = np.nonzero(side > h)[0]
        seg = side[:higher[0]] if higher.size else side
        bases.append(min(h, seg.min()) if seg.size else h)
    return float(h - max(bases)) if bases else 0.0


def _vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Parabola through (i-1, i, i+1), clamped to one cell around x[i]."""
    if i == 0 or i == x.size - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    B = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / den
    if A >= 0:
        return float(x1)
    v = -B / (2 * A)
    return float(np.clip(v, x0, x2))


def _is_local_max(y: np.ndarray, idx: tuple[int, ...]) -> bool:
    """Maximum over the neighbourhood; ties count only toward the smaller index."""
    h = y[idx]
    ranges = [range(max(0, k - 1), min(n, k + 2)) for k, n in zip(idx, y.shape)]
    strictly_lower = 0
    for nb in np.ndindex(*[len(r) for r in ranges]):
        j = tuple(r[k] for r, k in zip(ranges, nb))
        if j == idx:
            continue
        if y[j] > h:
            return False
        if y[j] == h and j < idx:
            return False
        strictly_lower += y[j] < h
    return strictly_lower > 0


def find_optima(sweep: SweepResult, min_prominence: float = DEFAULT_PROMINENCE) -> list[Optimum]:
    """Local maxima whose prominence exceeds ``min_prominence`` times the global max.

    For 2D maps the prominence is the smaller of the row and column 1D
    prominences. Locations are refined by separable parabolic fits.
    Results are sorted by location.
    """
    if min_prominence < 0:
        raise SweepError("min_prominence must be >= 0")
    y = np.array(sweep.intensity, dtype=float)
    if y.size == 0:
        raise SweepError("empty sweep")
    valid = ~sweep.flagged
    if not valid.any():
        return []
    y = np.where(valid, y, -np.inf)
    top = float(np.max(y[valid]))
    if top <= 0:
        return []
    threshold = min_prominence * top
    grids = [a.values for a in sweep.axes]
    found = []
    for idx in np.ndindex(*y.shape):
        if not valid[idx] or not _is_local_max(y, idx):
            continue
        proms = []
        for ax in range(y.ndim):
            line_idx = list(idx)
            line_idx[ax] = slice(None)
            line = y[tuple(line_idx)]
            if line.size > 1:
                proms.append(prominence_1d(np.where(np.isfinite(line), line, np.min(y[valid])), idx[ax]))
        prom = min(proms) if proms else 0.0
        if prom <= threshold or prom <= 0:
            continue
        boundary = any(k == 0 or k == n - 1 for k, n in zip(idx, y.shape) if n > 1)
        loc = tuple(float(g[k]) for g, k in zip(grids, idx))
        refined = []
        for ax, g in enumerate(grids):
            line_idx = list(idx)
            line_idx[ax] = slice(None)
            line = y[tuple(line_idx)]
            k = idx[ax]
            if 0 < k < g.size - 1 and np.all(np.isfinite(line[k - 1:k + 2])):
                refined.append(_vertex(g, line, k))
            else:
                refined.append(float(g[k]))
        found.append(Optimum(loc, tuple(refined), float(y[idx]), boundary, tuple(int(k) for k in idx), prom))
    found.sort(key=lambda o: o.location)
    return found


def dominant_optimum(optima: list[Optimum], interior_only: bool = True) -> Optimum | None:
    pool = [o for o in optima if not (interior_only and o.is_boundary)]
    if not pool:
        return None
    # max value; ties toward the smaller location
    return max(pool, key=lambda o: (o.value, [-v for v in o.location]))
