"""Photon-pair rates from the SFG correspondence, and coincidence-counting statistics.

Time tags are integer picoseconds. A coincidence histogram bin k collects
delays t2 - t1 in [k w - w/2, k w + w/2).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import optimize, special, stats

from .defaults import PAIR_SOURCE
from .materials import MaterialLibrary, WavelengthRangeError
from .nonlinear import sfg_intensity
from .stack import LayerStack

PS_PER_S = 10 ** 12


class SpdcError(ValueError):
    pass


class UndefinedCarError(SpdcError):
    pass


class UndefinedBoundError(SpdcError):
    pass


# --- spectral rate ------------------------------------------------------------

def idler_wavelength(pump_nm: float, signal_nm) -> np.ndarray:
    """Idler wavelength from 1/lp = 1/ls + 1/li (inf or negative when unphysical)."""
    s = np.asarray(signal_nm, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / (1.0 / pump_nm - 1.0 / s)


@dataclass(frozen=True)
class SpectralRate:
    pump_nm: float
    signal_nm: np.ndarray
    idler_nm: np.ndarray
    rate: np.ndarray          # NaN where flagged
    valid: np.ndarray

    def window_total(self, center_nm: float, width_nm: float) -> float:
        """Integrated rate over a rectangular signal-wavelength window.

        Raises if any flagged point falls inside the window.
        """
        if width_nm < 0:
            raise SpdcError("window width must be >= 0")
        inside = np.abs(self.signal_nm - center_nm) <= width_nm / 2
        if not inside.any():
            return 0.0
        if not self.valid[inside].all():
            bad = self.signal_nm[inside & ~self.valid]
            raise SpdcError(f"window includes flagged signal wavelengths {bad.tolist()}")
        x, y = self.signal_nm[inside], self.rate[inside]
        if x.size == 1:
            return 0.0
        return float(np.trapezoid(y, x))


def spdc_spectral_rate(stack: LayerStack, lib: MaterialLibrary, pump_nm: float, signal_nm) -> SpectralRate:
    """Relative pair rate per signal wavelength, taken as the SFG intensity of (signal, idler).

    Points whose idler is unphysical or outside the material tables are flagged.
    """
    s = np.atleast_1d(np.asarray(signal_nm, dtype=float))
    i = idler_wavelength(pump_nm, s)
    rate = np.full(s.shape, np.nan)
    valid = np.zeros(s.shape, bool)
    for k, (ls, li) in enumerate(zip(s, i)):
        if not (np.isfinite(li) and li > 0 and ls > pump_nm):
            continue
        try:
            rate[k] = sfg_intensity(stack, lib, ls, li).intensity
        except WavelengthRangeError:
            continue
        valid[k] = True
    return SpectralRate(float(pump_nm), s, i, rate, valid)


# --- time tags ----------------------------------------------------------------

@dataclass(frozen=True)
class PairSourceModel:
    pair_rate_per_mw: float = PAIR_SOURCE.pair_rate_per_mw
    singles_background_per_mw: tuple[float, float] = PAIR_SOURCE.singles_background_per_mw
    dark_rate: tuple[float, float] = PAIR_SOURCE.dark_rate
    jitter_sigma_ps: float = PAIR_SOURCE.jitter_sigma_ps
    pump_power_mw: float = PAIR_SOURCE.pump_power_mw
    duration_s: float = PAIR_SOURCE.duration_s
    seed: int = 0

    def __post_init__(self):
        rates = [self.pair_rate_per_mw, *self.singles_background_per_mw, *self.dark_rate,
                 self.jitter_sigma_ps, self.pump_power_mw]
        if not all(np.isfinite(r) and r >= 0 for r in rates):
            raise SpdcError("rates, jitter and power must be finite and >= 0")
        if not (np.isfinite(self.duration_s) and self.duration_s > 0):
            raise SpdcError("duration_s must be > 0")
        object.__setattr__(self, "singles_background_per_mw", tuple(map(float, self.singles_background_per_mw)))
        object.__setattr__(self, "dark_rate", tuple(map(float, self.dark_rate)))

    def pair_rate(self) -> float:
        return self.pair_rate_per_mw * self.pump_power_mw

    def singles_rate(self, channel: int) -> float:
        """Expected count rate of one channel (pairs + background + dark)."""
        c = channel - 1
        return (self.pair_rate_per_mw + self.singles_background_per_mw[c]) * self.pump_power_mw + self.dark_rate[c]


@dataclass(frozen=True)
class TagStream:
    channel: int
    timestamps_ps: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps_ps)
        if t.size and not np.issubdtype(t.dtype, np.integer):
            if not np.all(t == np.round(t)):
                raise SpdcError("timestamps must be integers (ps)")
        t = t.astype(np.int64)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise SpdcError("timestamps must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "timestamps_ps", t)

    def __len__(self) -> int:
        return int(self.timestamps_ps.size)

    def to_text(self) -> str:
        return "".join(f"{v}\n" for v in self.timestamps_ps)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii")

    @classmethod
    def load(cls, path, channel: int) -> "TagStream":
        values = [int(line) for line in Path(path).read_text(encoding="ascii").split() if line]
        return cls(channel, np.array(values, dtype=np.int64))


def _uniform_times(rng, rate: float, duration_ps: int) -> np.ndarray:
    n = rng.poisson(rate * duration_ps / PS_PER_S)
    return rng.integers(0, duration_ps, size=n, dtype=np.int64)


def simulate_tags(model: PairSourceModel) -> tuple[TagStream, TagStream]:
    """Monte-Carlo time tags for both channels, deterministic for a given seed.

    Tags that coincide to the picosecond within one channel are merged, as a
    real tagger would register one event.
    """
    rng = np.random.default_rng(model.seed)
    T = int(round(model.duration_s * PS_PER_S))
    pairs = _uniform_times(rng, model.pair_rate(), T)
    streams = []
    for c in (0, 1):
        if model.jitter_sigma_ps > 0:
            jitter = np.rint(rng.normal(0.0, model.jitter_sigma_ps, size=pairs.size)).astype(np.int64)
        else:
            jitter = np.zeros(pairs.size, np.int64)
        bg = _uniform_times(rng, model.singles_background_per_mw[c] * model.pump_power_mw, T)
        dark = _uniform_times(rng, model.dark_rate[c], T)
        streams.append(TagStream(c + 1, np.unique(np.concatenate([pairs + jitter, bg, dark]))))
    return streams[0], streams[1]


# --- histogram and CAR --------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceHistogram:
    bin_width_ps: int
    delay_bins: np.ndarray    # -H..H
    counts: np.ndarray
    total_time_s: float

    def __post_init__(self):
        if self.delay_bins.size % 2 != 1:
            raise SpdcError("histogram needs an odd number of bins")
        if np.any(self.counts < 0):
            raise SpdcError("counts must be >= 0")

    @property
    def half_window_bins(self) -> int:
        return int(self.delay_bins.size // 2)

    @property
    def delay_ps(self) -> np.ndarray:
        return self.delay_bins * self.bin_width_ps

    def to_csv(self, comment_lines=()) -> str:
        lines = [f"# {c}" for c in comment_lines]
        lines.append("delay_ps,counts")
        lines += [f"{d},{c}" for d, c in zip(self.delay_ps, self.counts)]
        return "\n".join(lines) + "\n"


def _as_sorted(tags, name: str) -> np.ndarray:
    t = tags.timestamps_ps if isinstance(tags, TagStream) else np.asarray(tags)
    t = np.asarray(t, dtype=np.int64)
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise SpdcError(f"{name} is not sorted")
    return t


def window_delays(t1: np.ndarray, t2: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """All delays t2 - t1 with lo <= delay < hi, using two binary searches."""
    start = np.searchsorted(t2, t1 + lo, side="left")
    stop = np.searchsorted(t2, t1 + hi, side="left")
    n = stop - start
    total = int(n.sum())
    if total == 0:
        return np.empty(0, np.int64)
    owner = np.repeat(np.arange(t1.size), n)
    offset = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
    return t2[start[owner] + offset] - t1[owner]


def coincidence_histogram(tags_1, tags_2, bin_width_ps: int = PAIR_SOURCE.bin_width_ps,
                          half_window_bins: int = PAIR_SOURCE.half_window_bins,
                          total_time_s: float | None = None) -> CoincidenceHistogram:
    w = int(bin_width_ps)
    H = int(half_window_bins)
    if w <= 0 or H < 0:
        raise SpdcError("bin width must be > 0 and half window >= 0")
    t1 = _as_sorted(tags_1, "channel 1")
    t2 = _as_sorted(tags_2, "channel 2")
    L = (2 * H + 1) * w
    d = window_delays(t1, t2, -(L // 2), -(-L // 2))
    k = (2 * d + w) // (2 * w)
    counts = np.bincount(k + H, minlength=2 * H + 1).astype(np.int64)
    if total_time_s is None:
        span = [t[-1] - t[0] for t in (t1, t2) if t.size > 1]
        total_time_s = max(span) / PS_PER_S if span else 0.0
    return CoincidenceHistogram(w, np.arange(-H, H + 1), counts, float(total_time_s))


def brute_force_histogram(t1, t2, bin_width_ps: int, half_window_bins: int) -> np.ndarray:
    """O(n1 n2) reference histogram."""
    t1 = np.asarray(t1, np.int64)
    t2 = np.asarray(t2, np.int64)
    H, w = half_window_bins, bin_width_ps
    counts = np.zeros(2 * H + 1, np.int64)
    for a in t1:
        d = t2 - a
        k = np.floor((d + w / 2) / w).astype(np.int64)
        k = k[np.abs(k) <= H]
        np.add.at(counts, k + H, 1)
    return counts


@dataclass(frozen=True)
class CarEstimate:
    peak_counts: int
    accidental_mean: float
    accidental_std: float
    car: float
    car_uncertainty: float
    accidental_samples: np.ndarray


def car(hist: CoincidenceHistogram, exclude_bins_around_peak: int = PAIR_SOURCE.exclude_bins) -> CarEstimate:
    """Peak (zero-delay bin) over the mean of the off-peak bins."""
    off = np.abs(hist.delay_bins) > exclude_bins_around_peak
    acc = hist.counts[off].astype(float)
    if acc.size < 10:
        raise SpdcError(f"only {acc.size} accidental bins after exclusion; need >= 10")
    peak = int(hist.counts[hist.delay_bins == 0][0])
    mean = float(acc.mean())
    if mean == 0:
        raise UndefinedCarError("accidental mean is zero; CAR undefined")
    std = float(acc.std(ddof=1))
    value = peak / mean
    # Poisson errors on the peak and on the accidental mean
    err = np.sqrt(peak / mean ** 2 + peak ** 2 / (acc.size * mean ** 3))
    return CarEstimate(peak, mean, std, value, float(err), acc)


def expected_car(model: PairSourceModel, bin_width_ps: int = PAIR_SOURCE.bin_width_ps) -> float:
    """Analytic CAR: 1 + (pairs landing in the zero bin) / (S1 S2 tau T)."""
    tau = bin_width_ps / PS_PER_S
    acc = model.singles_rate(1) * model.singles_rate(2) * tau * model.duration_s
    if acc == 0:
        return np.inf
    sigma = np.sqrt(2) * model.jitter_sigma_ps
    captured = 1.0 if sigma == 0 else special.erf(bin_width_ps / 2 / (sigma * np.sqrt(2)))
    return 1.0 + model.pair_rate() * model.duration_s * captured / acc


def classical_limit_power(model: PairSourceModel, bin_width_ps: int = PAIR_SOURCE.bin_width_ps,
                          limit: float = 2.0) -> float:
    """Largest pump power (mW) at which the expected CAR still reaches ``limit``."""
    def excess(p):
        return expected_car(replace(model, pump_power_mw=p), bin_width_ps) - limit

    d1, d2 = model.dark_rate
    b1 = model.pair_rate_per_mw + model.singles_background_per_mw[0]
    b2 = model.pair_rate_per_mw + model.singles_background_per_mw[1]
    # CAR - 1 peaks at sqrt(d1 d2 / (b1 b2)); below that dark counts dominate
    p_best = np.sqrt(d1 * d2 / (b1 * b2)) if b1 * b2 > 0 else 0.0
    lo = max(p_best, 1e-12)
    if excess(lo) <= 0:
        return 0.0
    hi = max(2 * lo, 1.0)
    while excess(hi) > 0:
        hi *= 2
        if hi > 1e12:
            return np.inf
    return float(optimize.brentq(excess, lo, hi, xtol=1e-12, rtol=1e-12))


# --- power scan ---------------------------------------------------------------

@dataclass(frozen=True)
class PowerScanResult:
    powers_mw: np.ndarray
    peak_counts: np.ndarray
    accidental_mean: np.ndarray
    coincidence_rate: np.ndarray   # net (peak - accidental) per second
    car: np.ndarray
    car_uncertainty: np.ndarray
    rate_slope: float
    rate_intercept: float
    rate_r_squared: float
    car_constant: float            # c in CAR ~ c / P

    @property
    def car_times_power(self) -> np.ndarray:
        return self.car * self.powers_mw

    def car_power_spread(self) -> float:
        """Largest relative deviation of CAR*P from its mean."""
        cp = self.car_times_power
        return float(np.max(np.abs(cp / cp.mean() - 1.0)))

    def to_csv(self) -> str:
        lines = ["power_mw,peak_counts,accidental_mean,coincidence_rate,car,car_uncertainty"]
        for row in zip(self.powers_mw, self.peak_counts, self.accidental_mean, self.coincidence_rate,
                       self.car, self.car_uncertainty):
            lines.append(",".join(f"{v:.10g}" for v in row))
        return "\n".join(lines) + "\n"


def _scan_point(args):
    model, bin_width, half_window, exclude = args
    t1, t2 = simulate_tags(model)
    hist = coincidence_histogram(t1, t2, bin_width, half_window, model.duration_s)
    est = car(hist, exclude)
    return est.peak_counts, est.accidental_mean, est.car, est.car_uncertainty


def power_scan(template: PairSourceModel, powers_mw, bin_width_ps: int = PAIR_SOURCE.bin_width_ps,
               half_window_bins: int = PAIR_SOURCE.half_window_bins,
               exclude_bins: int = PAIR_SOURCE.exclude_bins, workers: int = 1) -> PowerScanResult:
    """Simulate, histogram and estimate CAR at each power (seed = template seed + index)."""
    p = np.asarray(powers_mw, dtype=float)
    if p.size == 0 or np.any(p <= 0):
        raise SpdcError("powers must be > 0")
    jobs = [(replace(template, pump_power_mw=float(v), seed=template.seed + k), bin_width_ps,
             half_window_bins, exclude_bins) for k, v in enumerate(p)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_point, jobs))
    else:
        rows = [_scan_point(j) for j in jobs]
    peak, acc, cars, errs = (np.array(col, dtype=float) for col in zip(*rows))
    rate = (peak - acc) / template.duration_s
    if p.size >= 2:
        fit = stats.linregress(p, rate)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
    else:
        slope, intercept, r2 = float(rate[0] / p[0]), 0.0, 1.0
    c = float(np.sum(cars / p) / np.sum(1.0 / p ** 2))
    return PowerScanResult(p, peak.astype(np.int64), acc, rate, cars, errs, slope, intercept, r2, c)


# --- enhancement bounds -------------------------------------------------------

def enhancement_lower_bound(c_on: float, accidentals_on, accidentals_off) -> tuple[float, float]:
    """Signal above the on-structure accidental mean, in units of each accidental spread.

    Returns ((C - <A_on>) / std(A_on), (C - <A_on>) / std(A_off)) with unbiased std.
    """
    a_on = np.asarray(accidentals_on, dtype=float)
    a_off = np.asarray(accidentals_off, dtype=float)
    if a_on.size < 2 or a_off.size < 2:
        raise SpdcError("need at least two accidental samples per set")
    s_on, s_off = a_on.std(ddof=1), a_off.std(ddof=1)
    if s_on == 0 or s_off == 0:
        raise UndefinedBoundError("accidental samples have zero standard deviation")
    signal = c_on - a_on.mean()
    return float(signal / s_on), float(signal / s_off)
