import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shgstack.stack import (C2, D3H, Layer, LayerStack, NonlinearSpec, StackError, build_stack,
                            hbn_on_gold, hbn_on_sio2_gold, hbn_on_sio2_si, interface_positions,
                            monolayer_count_for, monolayer_positions)


def _layer(n, t_ml, thickness=None):
    return Layer("h-BN", n * t_ml if thickness is None else thickness, NonlinearSpec(D3H, n, t_ml))


def test_bare_interface(lib):
    stack = build_stack({"ambient": "vacuum", "layers": [], "substrate": "Si"}, lib)
    assert stack.layers == ()
    assert stack.thickness_nm == 0


def test_monolayer_count_consistent():
    desc = {"ambient": "vacuum", "substrate": "Au", "layers": [
        {"material": "h-BN", "thickness_nm": 10,
         "nonlinear": {"symmetry": "D3h_AA_prime", "monolayer_count": 30, "monolayer_thickness_nm": 0.333}}]}
    stack = build_stack(desc)
    assert stack.layers[0].nonlinear.monolayer_count == 30


def test_monolayer_count_mismatch():
    desc = {"ambient": "vacuum", "substrate": "Au", "layers": [
        {"material": "h-BN", "thickness_nm": 10, "nonlinear": {"monolayer_count": 10}}]}
    with pytest.raises(StackError, match="monolayer"):
        build_stack(desc)


def test_unknown_material(lib):
    with pytest.raises(StackError, match="unobtainium"):
        build_stack({"ambient": "vacuum", "layers": [{"material": "unobtainium", "thickness_nm": 5}],
                     "substrate": "Si"}, lib)


@pytest.mark.parametrize("index", [0, 30])
def test_bad_twist_index(index):
    with pytest.raises(StackError, match="twist"):
        NonlinearSpec(D3H, 30, 0.333, twist_interfaces=((index, 1.0),))


def test_unknown_fields_rejected():
    with pytest.raises(StackError):
        build_stack({"ambient": "vacuum", "substrate": "Si",
                     "layers": [{"material": "SiO2", "thickness_nm": 5, "colour": "blue"}]})
    with pytest.raises(StackError):
        build_stack({"ambient": "vacuum", "substrate": "Si", "layers": [
            {"material": "h-BN", "thickness_nm": 1, "nonlinear": {"chi_d": 1, "bogus": 2}}]})


@pytest.mark.parametrize("thickness", [0.0, -1.0, float("inf"), float("nan")])
def test_layer_thickness_positive(thickness):
    with pytest.raises(StackError):
        Layer("SiO2", thickness)


def test_monolayer_positions_examples():
    assert np.allclose(monolayer_positions(_layer(1, 0.333), 0), [0.1665])
    assert np.allclose(monolayer_positions(_layer(2, 0.333), 0), [0.1665, 0.4995])
    assert np.allclose(monolayer_positions(_layer(3, 1.0), 10), [10.5, 11.5, 12.5])


def test_interface_positions_sit_between_monolayers():
    layer = Layer("h-BN", 10 * 0.333, NonlinearSpec(D3H, 10, 0.333, twist_interfaces=((4, 1.0),)))
    z = monolayer_positions(layer, 2.0)
    zi = interface_positions(layer, 2.0)
    assert z[3] < zi[0] < z[4]


def test_sign_conventions():
    assert list(NonlinearSpec(D3H, 4, 0.333).signs()) == [1, -1, 1, -1]
    assert list(NonlinearSpec(C2, 3, 0.65).signs()) == [1, 1, 1]


def test_default_twist_strength_follows_the_monolayer_below():
    spec = NonlinearSpec(D3H, 10, 0.333, chi_d=2.0, twist_interfaces=(3, (4, None), (5, 0.7)))
    # monolayer 4 (below index 3) is negative, monolayer 5 positive
    assert spec.twist_interfaces == ((3, -2.0), (4, 2.0), (5, 0.7))
    desc = {"ambient": "vacuum", "substrate": "Au", "layers": [
        {"material": "h-BN", "thickness_nm": 3.33,
         "nonlinear": {"monolayer_count": 10, "twist_interfaces": [{"monolayer_index": 3}]}}]}
    assert build_stack(desc).layers[0].nonlinear.twist_interfaces == ((3, -1.0),)


def test_parity_forcing():
    assert monolayer_count_for(10.0, 0.333) == 30
    assert monolayer_count_for(10.0, 0.333, "odd") == 31
    assert monolayer_count_for(10.0, 0.333, "even") == 30
    assert monolayer_count_for(0.1, 0.333, "even") == 2
    with pytest.raises(StackError):
        monolayer_count_for(1.0, 0.333, "prime")


def test_parity_in_json_sets_layer_thickness():
    desc = {"ambient": "vacuum", "substrate": "Au", "layers": [
        {"material": "hBN", "thickness_nm": 8.0, "nonlinear": {"parity": "odd"}}]}
    layer = build_stack(desc).layers[0]
    assert layer.material_name == "h-BN"
    assert layer.nonlinear.monolayer_count % 2 == 1
    assert layer.thickness_nm == pytest.approx(layer.nonlinear.monolayer_count * 0.333)


def test_round_trip_through_json():
    stack = hbn_on_sio2_gold(8.0, 64.0, "odd")
    again = build_stack(json.dumps(stack.to_dict()))
    assert again == stack


def test_geometry_helpers():
    assert hbn_on_gold(10).substrate == "Au"
    s = hbn_on_sio2_si(10)
    assert [l.material_name for l in s.layers] == ["h-BN", "SiO2"]
    assert s.layers[1].thickness_nm == 285
    assert len(hbn_on_sio2_gold(10, 0.0).layers) == 1   # zero spacer drops out


def test_nbocl2_defaults():
    desc = {"ambient": "vacuum", "substrate": "Au", "layers": [
        {"material": "NbOCl2", "thickness_nm": 6.5, "nonlinear": {}}]}
    nl = build_stack(desc).layers[0].nonlinear
    assert nl.symmetry == C2 and nl.monolayer_thickness_nm == 0.65 and nl.monolayer_count == 10


@given(st.integers(1, 400), st.floats(0.2, 2.0), st.floats(0.0, 500.0))
def test_sheets_strictly_inside_layer(n, t_ml, z_top):
    layer = _layer(n, t_ml)
    z = monolayer_positions(layer, z_top)
    assert z.size == n
    assert np.all(np.diff(z) > 0)
    assert z[0] > z_top and z[-1] < z_top + layer.thickness_nm


@given(st.lists(st.floats(0.5, 300.0), max_size=6))
def test_depth_bookkeeping(thicknesses):
    stack = LayerStack("vacuum", tuple(Layer("SiO2", t) for t in thicknesses), "Si")
    assert stack.thickness_nm == pytest.approx(sum(thicknesses))
    tops = [stack.layer_top(i) for i in range(len(thicknesses))]
    for i in range(1, len(tops)):
        assert tops[i] == pytest.approx(tops[i - 1] + thicknesses[i - 1])
