import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import pairwise_histogram
from shgstack import spdc
from shgstack.nonlinear import sfg_intensity
from shgstack.spdc import (CoincidenceHistogram, PairSourceModel, SpdcError, TagStream, UndefinedBoundError,
                           UndefinedCarError)
from shgstack.stack import hbn_on_gold


def hist_from(counts, w=5000):
    counts = np.asarray(counts, np.int64)
    H = counts.size // 2
    return CoincidenceHistogram(w, np.arange(-H, H + 1), counts, 1.0)


# --- spectral rate ------------------------------------------------------------------------------

def test_degenerate_point(lib):
    stack = hbn_on_gold(30.0, "odd")
    r = spdc.spdc_spectral_rate(stack, lib, 409.0, [818.0])
    assert r.idler_nm[0] == pytest.approx(818.0)
    assert r.rate[0] == pytest.approx(sfg_intensity(stack, lib, 818.0, 818.0).intensity, rel=1e-12)


def test_signal_idler_exchange(lib):
    stack = hbn_on_gold(30.0, "odd")
    ls = 800.0
    li = float(spdc.idler_wavelength(409.0, ls))
    a = spdc.spdc_spectral_rate(stack, lib, 409.0, [ls]).rate[0]
    b = spdc.spdc_spectral_rate(stack, lib, 409.0, [li]).rate[0]
    assert a == pytest.approx(b, rel=1e-12)


def test_unphysical_or_out_of_range_idler_flagged(lib):
    stack = hbn_on_gold(30.0, "odd")
    r = spdc.spdc_spectral_rate(stack, lib, 409.0, [400.0, 409.0, 818.0, 430.0])
    assert r.valid.tolist() == [False, False, True, False]   # 430 nm needs an ~8.4 um idler
    assert np.isnan(r.rate[~r.valid]).all()
    with pytest.raises(SpdcError):
        r.window_total(425.0, 20.0)


def test_wider_window_never_decreases(lib):
    stack = hbn_on_gold(30.0, "odd")
    grid = np.linspace(780.0, 860.0, 41)
    r = spdc.spdc_spectral_rate(stack, lib, 409.0, grid)
    totals = [r.window_total(818.0, w) for w in (0, 4, 10, 20, 40, 80)]
    assert all(b >= a for a, b in zip(totals, totals[1:]))
    assert totals[-1] > 0


# --- simulation ---------------------------------------------------------------------------------

def test_null_process():
    a, b = spdc.simulate_tags(PairSourceModel(0.0, (0.0, 0.0), (0.0, 0.0), 0.0, 1.0, 10.0))
    assert len(a) == len(b) == 0


def test_pairs_without_jitter_coincide():
    m = PairSourceModel(pair_rate_per_mw=100.0, singles_background_per_mw=(0, 0), jitter_sigma_ps=0.0,
                        pump_power_mw=1.0, duration_s=10.0, seed=4)
    a, b = spdc.simulate_tags(m)
    assert np.array_equal(a.timestamps_ps, b.timestamps_ps)
    assert abs(len(a) - 1000) < 5 * np.sqrt(1000)


def test_channel_count_mean_over_seeds():
    base = dict(pair_rate_per_mw=50.0, singles_background_per_mw=(200.0, 20.0), dark_rate=(30.0, 0.0),
                pump_power_mw=0.8, duration_s=2.0)
    counts = np.array([len(spdc.simulate_tags(PairSourceModel(**base, seed=s))[0]) for s in range(100)])
    expected = (50.0 + 200.0) * 0.8 * 2.0 + 30.0 * 2.0
    assert abs(counts.mean() - expected) <= 3 * np.sqrt(expected / counts.size)


def test_seed_reproducible():
    m = PairSourceModel(duration_s=1.0, seed=9)
    a1, b1 = spdc.simulate_tags(m)
    a2, b2 = spdc.simulate_tags(m)
    assert np.array_equal(a1.timestamps_ps, a2.timestamps_ps) and np.array_equal(b1.timestamps_ps, b2.timestamps_ps)
    assert not np.array_equal(spdc.simulate_tags(PairSourceModel(duration_s=1.0, seed=10))[0].timestamps_ps,
                              a1.timestamps_ps)


def test_invalid_model():
    with pytest.raises(SpdcError):
        PairSourceModel(duration_s=0.0)
    with pytest.raises(SpdcError):
        PairSourceModel(pair_rate_per_mw=-1.0)


def test_tag_stream_io(tmp_path):
    s = TagStream(1, [5, 17, 4000000000000])
    p = tmp_path / "ch1.txt"
    s.save(p)
    assert p.read_text() == "5\n17\n4000000000000\n"
    assert np.array_equal(TagStream.load(p, 1).timestamps_ps, s.timestamps_ps)
    with pytest.raises(SpdcError):
        TagStream(1, [3, 3])
    with pytest.raises(SpdcError):
        TagStream(2, [1.5, 2.0])


# --- histogram ---------------------------------------------------------------------------------

def test_single_pair_lands_in_centre():
    h = spdc.coincidence_histogram([1000], [1000], 5000, 3)
    assert h.counts.tolist() == [0, 0, 0, 1, 0, 0, 0]


def test_bin_edges_round_half_up():
    # a delay of exactly +-w/2 goes to the bin on its positive side
    assert spdc.coincidence_histogram([10000], [7500], 5000, 1).counts.tolist() == [0, 1, 0]
    assert spdc.coincidence_histogram([10000], [12500], 5000, 1).counts.tolist() == [0, 0, 1]
    assert spdc.coincidence_histogram([10000], [7499], 5000, 1).counts.tolist() == [1, 0, 0]


def test_unsorted_rejected():
    with pytest.raises(SpdcError):
        spdc.coincidence_histogram([5, 1], [1, 2])


def test_histogram_csv():
    text = spdc.coincidence_histogram([0], [5000], 5000, 1).to_csv(["run 1"]).splitlines()
    assert text == ["# run 1", "delay_ps,counts", "-5000,0", "0,0", "5000,1"]


@settings(max_examples=40)
@given(st.integers(0, 400), st.integers(0, 400), st.integers(1, 20000), st.integers(0, 12),
       st.integers(0, 2 ** 31 - 1))
def test_histogram_matches_pairwise_oracle(n1, n2, w, H, seed):
    rng = np.random.default_rng(seed)
    span = max(1, (n1 + n2) * w)
    a = np.unique(rng.integers(0, span, n1))
    b = np.unique(rng.integers(0, span, n2))
    got = spdc.coincidence_histogram(a, b, w, H).counts
    assert np.array_equal(got, pairwise_histogram(a, b, w, H))
    assert np.array_equal(got, spdc.brute_force_histogram(a, b, w, H))


def test_large_streams_match_oracle():
    rng = np.random.default_rng(1)
    a = np.unique(rng.integers(0, 10 ** 10, 10_000))
    b = np.unique(rng.integers(0, 10 ** 10, 10_000))
    assert np.array_equal(spdc.coincidence_histogram(a, b).counts, pairwise_histogram(a, b, 5000, 20))


def test_accidental_floor():
    m = PairSourceModel(pair_rate_per_mw=0.0, singles_background_per_mw=(1e4, 1e4), pump_power_mw=1.0,
                        duration_s=100.0, seed=21)
    a, b = spdc.simulate_tags(m)
    h = spdc.coincidence_histogram(a, b, 5000, 20, 100.0)
    expected = 1e4 * 1e4 * 5e-9 * 100.0
    assert abs(h.counts.mean() - expected) <= 5 * np.sqrt(expected / h.counts.size)


# --- CAR ---------------------------------------------------------------------------------------

def test_car_definition():
    counts = np.full(21, 10)
    counts[10] = 100
    est = spdc.car(hist_from(counts))
    assert est.car == 10 and est.peak_counts == 100 and est.accidental_mean == 10 and est.accidental_std == 0
    assert est.car_uncertainty == pytest.approx(np.sqrt(100 / 100 + 100 ** 2 / (18 * 1000)))


def test_car_undefined_without_accidentals():
    counts = np.zeros(21, np.int64)
    counts[10] = 7
    with pytest.raises(UndefinedCarError):
        spdc.car(hist_from(counts))


def test_car_needs_enough_bins():
    with pytest.raises(SpdcError):
        spdc.car(hist_from(np.ones(11)), exclude_bins_around_peak=1)


def test_pure_accidentals_give_unit_car():
    cars = []
    for seed in range(20):
        m = PairSourceModel(pair_rate_per_mw=0.0, singles_background_per_mw=(2e4, 2e4), pump_power_mw=1.0,
                            duration_s=20.0, seed=seed)
        cars.append(spdc.car(spdc.coincidence_histogram(*spdc.simulate_tags(m))).car)
    cars = np.array(cars)
    assert abs(cars.mean() - 1) <= 3 * cars.std(ddof=1) / np.sqrt(cars.size)


def test_default_operating_point():
    m = PairSourceModel(seed=2)
    est = spdc.car(spdc.coincidence_histogram(*spdc.simulate_tags(m), total_time_s=m.duration_s))
    assert est.car > 2
    assert abs(est.car - spdc.expected_car(m)) <= 4 * est.car_uncertainty
    assert 7 <= spdc.expected_car(m) <= 9


def test_car_grows_as_background_vanishes():
    base = PairSourceModel(duration_s=20.0, seed=5)
    values = []
    for scale in (1.0, 0.3, 0.1):
        m = PairSourceModel(singles_background_per_mw=tuple(scale * v for v in base.singles_background_per_mw),
                            duration_s=20.0, seed=5)
        values.append(spdc.car(spdc.coincidence_histogram(*spdc.simulate_tags(m))).car)
    assert values[0] < values[1] < values[2]
    assert values[2] > 20 * values[0]


def test_classical_limit_power():
    m = PairSourceModel()
    p = spdc.classical_limit_power(m)
    assert spdc.expected_car(PairSourceModel(pump_power_mw=p)) == pytest.approx(2, rel=1e-6)
    assert p > m.pump_power_mw
    for q in (0.05, 0.25, 0.9 * p):
        assert spdc.expected_car(PairSourceModel(pump_power_mw=q)) > 2


def test_jitter_keeps_pairs_in_central_bin():
    m = PairSourceModel(pair_rate_per_mw=1e4, singles_background_per_mw=(0, 0), pump_power_mw=1.0,
                        duration_s=1.0, seed=3)
    h = spdc.coincidence_histogram(*spdc.simulate_tags(m))
    assert h.counts[h.half_window_bins] / h.counts.sum() > 0.99


# --- power scan --------------------------------------------------------------------------------

def test_power_scan_laws():
    scan = spdc.power_scan(PairSourceModel(seed=11), (0.05, 0.10, 0.15, 0.20, 0.25))
    assert scan.rate_r_squared > 0.99
    assert scan.car_power_spread() <= 0.15
    assert np.all(np.diff(scan.car) < 0)
    lines = scan.to_csv().splitlines()
    assert lines[0].startswith("power_mw,")
    assert len(lines) == 6


def test_doubling_power_doubles_expected_pairs():
    a = PairSourceModel(pump_power_mw=0.1)
    b = PairSourceModel(pump_power_mw=0.2)
    assert b.pair_rate() == 2 * a.pair_rate()


def test_power_scan_parallel_matches_serial():
    m = PairSourceModel(duration_s=5.0, seed=2)
    a = spdc.power_scan(m, (0.1, 0.2, 0.3))
    b = spdc.power_scan(m, (0.1, 0.2, 0.3), workers=3)
    assert np.array_equal(a.peak_counts, b.peak_counts) and np.array_equal(a.car, b.car)


def test_power_scan_rejects_bad_power():
    with pytest.raises(SpdcError):
        spdc.power_scan(PairSourceModel(), (0.1, 0.0))


# --- enhancement bounds -------------------------------------------------------------------------

def test_bounds_fixtures():
    assert spdc.enhancement_lower_bound(12, [1, 3], [0, 2]) == (10 / np.sqrt(2), 10 / np.sqrt(2))
    with pytest.raises(UndefinedBoundError):
        spdc.enhancement_lower_bound(12, [2, 2, 2, 2], [0, 2])
    with pytest.raises(UndefinedBoundError):
        spdc.enhancement_lower_bound(12, [1, 3], [5, 5])
    with pytest.raises(SpdcError):
        spdc.enhancement_lower_bound(12, [1], [0, 2])


@given(st.lists(st.integers(0, 100), min_size=2, max_size=30).filter(lambda v: len(set(v)) > 1),
       st.lists(st.integers(0, 100), min_size=2, max_size=30).filter(lambda v: len(set(v)) > 1))
def test_zero_signal_bound(a_on, a_off):
    c = float(np.mean(a_on))
    on, off = spdc.enhancement_lower_bound(c, a_on, a_off)
    assert on == pytest.approx(0, abs=1e-12) and off == pytest.approx(0, abs=1e-12)
