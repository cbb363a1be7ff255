"""Layer stacks with optional nonlinear (monolayer-resolved) annotations.

Depth ``z`` is measured downward from the top of the first layer; the ambient
occupies ``z < 0`` and the substrate starts at the total stack thickness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np

from . import defaults
from .materials import MaterialLibrary

D3H = "D3h_AA_prime"
C2 = "C2_polar"
SYMMETRIES = (D3H, C2)

MATERIAL_ALIASES = {"hBN": "h-BN", "hbn": "h-BN", "NbOCl₂": "NbOCl2", "SiO₂": "SiO2", "air": "vacuum"}


class StackError(ValueError):
    pass


def canonical_material(name: str) -> str:
    return MATERIAL_ALIASES.get(name, name)


@dataclass(frozen=True)
class NonlinearSpec:
    symmetry: str
    monolayer_count: int
    monolayer_thickness_nm: float
    chi_d: float = 1.0
    chi_q_ratio: float = defaults.CHI_Q_RATIO
    orientation_deg: float = 0.0
    twist_interfaces: tuple = ()   # (index, chi_int) pairs; a bare index or chi_int=None takes the default

    def __post_init__(self):
        if self.symmetry not in SYMMETRIES:
            raise StackError(f"unknown symmetry {self.symmetry!r}; expected one of {SYMMETRIES}")
        if int(self.monolayer_count) != self.monolayer_count or self.monolayer_count < 1:
            raise StackError("monolayer_count must be an integer >= 1")
        if not self.monolayer_thickness_nm > 0:
            raise StackError("monolayer_thickness_nm must be > 0")
        if self.chi_d < 0 or self.chi_q_ratio < 0:
            raise StackError("chi_d and chi_q_ratio must be >= 0")
        signs = self.signs()
        twists = []
        for entry in self.twist_interfaces:
            idx, chi = (entry, None) if np.ndim(entry) == 0 else (tuple(entry) + (None,))[:2]
            idx = int(idx)
            if not 1 <= idx <= self.monolayer_count - 1:
                raise StackError(
                    f"twist interface index {idx} outside [1, {self.monolayer_count - 1}]")
            if chi is None:
                # unspecified: the signed strength of the monolayer just below the junction
                chi = signs[idx] * self.chi_d
            twists.append((idx, float(chi)))
        twists = tuple(twists)
        object.__setattr__(self, "monolayer_count", int(self.monolayer_count))
        object.__setattr__(self, "twist_interfaces", twists)

    @property
    def chi_q_eff(self) -> float:
        """Per-sheet quadrupolar coupling, chi_q_ratio * chi_d * t_ml."""
        return self.chi_q_ratio * self.chi_d * self.monolayer_thickness_nm

    def signs(self) -> np.ndarray:
        """Dipolar sign of each monolayer, top (m=1) first."""
        m = np.arange(self.monolayer_count)
        if self.symmetry == D3H:
            return np.where(m % 2 == 0, 1.0, -1.0)
        return np.ones(self.monolayer_count)


@dataclass(frozen=True)
class Layer:
    material_name: str
    thickness_nm: float
    nonlinear: NonlinearSpec | None = None

    def __post_init__(self):
        t = float(self.thickness_nm)
        if not (np.isfinite(t) and t > 0):
            raise StackError(f"layer {self.material_name!r}: thickness must be finite and > 0, got {t}")
        object.__setattr__(self, "thickness_nm", t)
        if self.nonlinear is not None:
            nl = self.nonlinear
            mismatch = abs(nl.monolayer_count * nl.monolayer_thickness_nm - t)
            if mismatch > 0.5 * nl.monolayer_thickness_nm + 1e-12:
                raise StackError(
                    f"layer {self.material_name!r}: {nl.monolayer_count} x {nl.monolayer_thickness_nm} nm "
                    f"monolayers do not fill {t} nm")


@dataclass(frozen=True)
class LayerStack:
    ambient: str
    layers: tuple[Layer, ...] = ()
    substrate: str = "vacuum"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def thickness_nm(self) -> float:
        return float(sum(layer.thickness_nm for layer in self.layers))

    def interfaces(self) -> np.ndarray:
        """Depths of all interfaces, starting with 0 (ambient/first layer)."""
        return np.concatenate([[0.0], np.cumsum([layer.thickness_nm for layer in self.layers])])

    def layer_top(self, index: int) -> float:
        return float(self.interfaces()[index])

    def nonlinear_layers(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if layer.nonlinear is not None]

    def materials(self) -> set[str]:
        return {self.ambient, self.substrate, *(layer.material_name for layer in self.layers)}

    def check_materials(self, lib: MaterialLibrary) -> None:
        for name in sorted(self.materials()):
            if name not in lib:
                raise StackError(f"unknown material {name!r}")

    def replace_layer(self, index: int, layer: Layer | None) -> "LayerStack":
        layers = list(self.layers)
        if layer is None:
            del layers[index]
        else:
            layers[index] = layer
        return replace(self, layers=tuple(layers))

    def to_dict(self) -> dict[str, Any]:
        out = []
        for layer in self.layers:
            item: dict[str, Any] = {"material": layer.material_name, "thickness_nm": layer.thickness_nm}
            if layer.nonlinear is not None:
                nl = layer.nonlinear
                item["nonlinear"] = {
                    "symmetry": nl.symmetry,
                    "monolayer_count": nl.monolayer_count,
                    "monolayer_thickness_nm": nl.monolayer_thickness_nm,
                    "chi_d": nl.chi_d,
                    "chi_q_ratio": nl.chi_q_ratio,
                    "orientation_deg": nl.orientation_deg,
                    "twist_interfaces": [list(t) for t in nl.twist_interfaces],
                }
            out.append(item)
        return {"ambient": self.ambient, "layers": out, "substrate": self.substrate}


def monolayer_positions(layer: Layer, z_top: float) -> np.ndarray:
    """Depths of monolayer centres, z_top + (m - 1/2) t_ml for m = 1..N."""
    if layer.nonlinear is None:
        raise StackError(f"layer {layer.material_name!r} has no nonlinear annotation")
    nl = layer.nonlinear
    return z_top + (np.arange(1, nl.monolayer_count + 1) - 0.5) * nl.monolayer_thickness_nm


def interface_positions(layer: Layer, z_top: float) -> np.ndarray:
    """Depths of declared twist interfaces (boundary between monolayer i and i+1)."""
    nl = layer.nonlinear
    if nl is None:
        return np.empty(0)
    return z_top + np.array([i for i, _ in nl.twist_interfaces], dtype=float) * nl.monolayer_thickness_nm


def nonlinear_spec_for(material: str, thickness_nm: float, symmetry: str | None = None,
                       parity: str | None = None, **kwargs) -> NonlinearSpec:
    """Derive a NonlinearSpec that fills ``thickness_nm`` with whole monolayers.

    ``parity`` ('odd' / 'even') forces the count to the nearest integer of that
    parity; ties go to the larger count.
    """
    t_ml = kwargs.pop("monolayer_thickness_nm", None) or defaults.MONOLAYER_THICKNESS_NM.get(material)
    if t_ml is None:
        raise StackError(f"no default monolayer thickness for {material!r}")
    if symmetry is None:
        symmetry = C2 if material == "NbOCl2" else D3H
    count = monolayer_count_for(thickness_nm, t_ml, parity)
    return NonlinearSpec(symmetry=symmetry, monolayer_count=count, monolayer_thickness_nm=t_ml, **kwargs)


def monolayer_count_for(thickness_nm: float, t_ml: float, parity: str | None = None) -> int:
    exact = thickness_nm / t_ml
    n = max(1, int(np.floor(exact + 0.5)))
    if parity is None:
        return n
    want = {"odd": 1, "even": 0}.get(parity)
    if want is None:
        raise StackError(f"parity must be 'odd' or 'even', got {parity!r}")
    if n % 2 == want:
        return n
    # nearest count of the requested parity; ties -> larger
    lo, hi = n - 1, n + 1
    if lo < 1 or (lo < 2 and want == 0):
        return hi
    return hi if abs(hi - exact) <= abs(exact - lo) else lo


def _parse_nonlinear(material: str, thickness: float, raw: Mapping[str, Any]) -> NonlinearSpec:
    raw = dict(raw)
    twists = raw.pop("twist_interfaces", [])
    parsed_twists = []
    for t in twists:
        if isinstance(t, Mapping):
            parsed_twists.append((t["monolayer_index"], t.get("chi_int")))
        else:
            parsed_twists.append(t)
    parity = raw.pop("parity", None)
    known = {"symmetry", "monolayer_count", "monolayer_thickness_nm", "chi_d", "chi_q_ratio",
             "orientation_deg"}
    unknown = set(raw) - known
    if unknown:
        raise StackError(f"unknown nonlinear field(s): {sorted(unknown)}")
    t_ml = raw.get("monolayer_thickness_nm") or defaults.MONOLAYER_THICKNESS_NM.get(material)
    if t_ml is None:
        raise StackError(f"monolayer_thickness_nm required for {material!r}")
    count = raw.get("monolayer_count")
    if count is None:
        count = monolayer_count_for(thickness, t_ml, parity)
    symmetry = raw.get("symmetry") or (C2 if material == "NbOCl2" else D3H)
    return NonlinearSpec(
        symmetry=symmetry,
        monolayer_count=count,
        monolayer_thickness_nm=t_ml,
        chi_d=float(raw.get("chi_d", 1.0)),
        chi_q_ratio=float(raw.get("chi_q_ratio", defaults.CHI_Q_RATIO)),
        orientation_deg=float(raw.get("orientation_deg", 0.0)),
        twist_interfaces=tuple(parsed_twists),
    )


def build_stack(description: Mapping[str, Any] | str, lib: MaterialLibrary | None = None) -> LayerStack:
    """Validate a stack description (dict or JSON text) and return a LayerStack.

    Material names are checked against ``lib`` when given.
    """
    if isinstance(description, str):
        description = json.loads(description)
    try:
        ambient = canonical_material(description["ambient"])
        substrate = canonical_material(description["substrate"])
        raw_layers = description.get("layers", [])
    except (KeyError, TypeError) as exc:
        raise StackError(f"malformed stack description: {exc}") from exc

    layers = []
    for i, raw in enumerate(raw_layers):
        extra = set(raw) - {"material", "thickness_nm", "nonlinear"}
        if extra:
            raise StackError(f"layer {i}: unknown field(s) {sorted(extra)}")
        try:
            material = canonical_material(raw["material"])
            thickness = float(raw["thickness_nm"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StackError(f"layer {i}: malformed ({exc})") from exc
        nl = raw.get("nonlinear")
        spec = _parse_nonlinear(material, thickness, nl) if nl is not None else None
        if spec is not None and nl.get("parity") and nl.get("monolayer_count") is None:
            # parity forcing may move the count by one; the layer follows the count
            thickness = spec.monolayer_count * spec.monolayer_thickness_nm
        layers.append(Layer(material, thickness, spec))

    stack = LayerStack(ambient, tuple(layers), substrate)
    if lib is not None:
        stack.check_materials(lib)
    return stack


def load_stack(path, lib: MaterialLibrary | None = None) -> LayerStack:
    with open(path, encoding="utf-8") as fh:
        return build_stack(json.load(fh), lib)


# Frequently used geometries. Thicknesses in nm.

def hbn_on(substrate_layers: Sequence[tuple[str, float]], hbn_nm: float, substrate: str,
           parity: str | None = None, symmetry: str = D3H, **nl_kwargs) -> LayerStack:
    """h-BN flake (top) on an arbitrary layered substrate, in vacuum."""
    spec = nonlinear_spec_for("h-BN", hbn_nm, symmetry=symmetry, parity=parity, **nl_kwargs)
    flake = Layer("h-BN", spec.monolayer_count * spec.monolayer_thickness_nm, spec)
    rest = [Layer(m, t) for m, t in substrate_layers if t > 0]
    return LayerStack("vacuum", (flake, *rest), substrate)


def hbn_on_gold(hbn_nm: float, parity: str | None = None, **kw) -> LayerStack:
    return hbn_on([], hbn_nm, "Au", parity, **kw)


def hbn_on_sio2_si(hbn_nm: float, parity: str | None = None, oxide_nm: float = 285.0, **kw) -> LayerStack:
    return hbn_on([("SiO2", oxide_nm)], hbn_nm, "Si", parity, **kw)


def hbn_on_sio2_gold(hbn_nm: float, spacer_nm: float, parity: str | None = None, **kw) -> LayerStack:
    return hbn_on([("SiO2", spacer_nm)], hbn_nm, "Au", parity, **kw)


__all__ = [
    "C2", "D3H", "Layer", "LayerStack", "NonlinearSpec", "StackError", "build_stack",
    "hbn_on", "hbn_on_gold", "hbn_on_sio2_gold", "hbn_on_sio2_si", "interface_positions",
    "load_stack", "monolayer_count_for", "monolayer_positions", "nonlinear_spec_for",
]
