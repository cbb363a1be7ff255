"""Fits and summaries for simulated or measured data: Lorentz peaks, polar patterns, lobe ratios."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from . import polarization as pol
from .sweep import Axis, SweepResult

PAIRING_TOLERANCE_DEG = 15.0
MAX_FIT_EVALUATIONS = 2000


class FitError(ValueError):
    pass


# --- Lorentz -----------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    wavelength_nm: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.wavelength_nm, dtype=float).reshape(-1)
        y = np.asarray(self.counts, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise FitError("wavelength and counts differ in length")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise FitError("wavelength grid must be strictly increasing")
        if np.any(y < 0) or not np.all(np.isfinite(y)):
            raise FitError("counts must be finite and >= 0")
        object.__setattr__(self, "wavelength_nm", x)
        object.__setattr__(self, "counts", y)


@dataclass(frozen=True)
class LorentzFit:
    center_nm: float
    fwhm_nm: float
    amplitude: float
    offset: float
    residual_rms: float
    evaluations: int

    def __call__(self, x):
        return lorentzian(np.asarray(x, float), self.center_nm, self.fwhm_nm, self.amplitude, self.offset)


def lorentzian(x, center, fwhm, amplitude, offset):
    g2 = (fwhm / 2) ** 2
    return offset + amplitude * g2 / ((x - center) ** 2 + g2)


def _lorentz_jac(p, x):
    x0, G, A, _ = p
    g = G / 2
    den = (x - x0) ** 2 + g ** 2
    shape = g ** 2 / den
    d_x0 = A * g ** 2 * 2 * (x - x0) / den ** 2
    # d/dG of g^2/den with g = G/2
    d_g = A * (2 * g * den - g ** 2 * 2 * g) / den ** 2
    return np.column_stack([d_x0, d_g / 2, shape, np.ones_like(x)])


def _lorentz_guess(x, y):
    offset = float(np.min(y))
    i = int(np.argmax(y))
    amp = float(y[i] - offset)
    half = offset + amp / 2
    above = np.nonzero(y >= half)[0]
    width = float(x[above[-1]] - x[above[0]]) if above.size > 1 else float(np.median(np.diff(x)))
    return [float(x[i]), max(width, float(np.min(np.diff(x)))), amp, offset]


def lorentz_fit(spec: Spectrum, initial_guess=None) -> LorentzFit:
    """Least-squares fit of offset + A (G/2)^2 / ((x - x0)^2 + (G/2)^2) to the raw counts."""
    x, y = spec.wavelength_nm, spec.counts
    if x.size < 5:
        raise FitError("need at least 5 points")
    if np.ptp(y) == 0:
        raise FitError("constant spectrum")
    p0 = list(initial_guess) if initial_guess is not None else _lorentz_guess(x, y)
    scale = float(np.max(np.abs(y)))
    res = optimize.least_squares(
        lambda p: (lorentzian(x, *p) - y) / scale,
        p0, jac=lambda p: _lorentz_jac(p, x) / scale,
        bounds=([-np.inf, 1e-12, 0.0, -np.inf], np.inf),
        x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=MAX_FIT_EVALUATIONS)
    if res.status <= 0:
        raise FitError(f"Lorentz fit did not converge: {res.message}")
    x0, G, A, off = res.x
    rms = float(np.sqrt(np.mean((lorentzian(x, *res.x) - y) ** 2)))
    return LorentzFit(float(x0), float(G), float(A), float(off), rms, int(res.nfev))


# --- lobe statistics -----------------------------------------------------------

@dataclass(frozen=True)
class EnhancementStats:
    angles_on_deg: np.ndarray
    angles_off_deg: np.ndarray
    ratios: np.ndarray
    mean: float
    std: float


def circular_maxima(angles_deg: np.ndarray, intensity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of local maxima on a periodic grid and their prominences."""
    y = np.asarray(intensity, float)
    n = y.size
    left, right = np.roll(y, 1), np.roll(y, -1)
    idx = np.nonzero((y > left) & (y >= right))[0]
    # prominence on the grid unrolled so that it starts at the global minimum
    start = int(np.argmin(y))
    unrolled = np.roll(y, -start)
    unrolled = np.append(unrolled, unrolled[0])
    prom = np.empty(idx.size)
    for k, i in enumerate(idx):
        j = (i - start) % n
        h = unrolled[j]
        lmin = unrolled[:j + 1][::-1]
        rmin = unrolled[j:]
        bases = []
        for side in (lmin[1:], rmin[1:]):
            higher = np.nonzero(side > h)[0]
            seg = side[:higher[0]] if higher.size else side
            bases.append(seg.min() if seg.size else h)
        prom[k] = h - max(bases)
    return idx, prom


def dominant_maxima(angles_deg, intensity, count: int = 6) -> np.ndarray:
    """Indices of the ``count`` most prominent maxima, sorted by angle."""
    idx, prom = circular_maxima(np.asarray(angles_deg), intensity)
    if idx.size < count:
        raise FitError(f"found {idx.size} maxima; need {count}")
    order = np.argsort(-prom, kind="stable")[:count]
    return np.sort(idx[order])


def _angular_distance(a, b):
    d = np.abs((np.asarray(a) - np.asarray(b)) % 360.0)
    return np.minimum(d, 360.0 - d)


def six_maxima_stats(on: pol.PolarPattern, off: pol.PolarPattern,
                     tolerance_deg: float = PAIRING_TOLERANCE_DEG) -> EnhancementStats:
    """Per-lobe enhancement on/off from the six dominant maxima of each pattern."""
    if not np.array_equal(np.asarray(on.angles_deg), np.asarray(off.angles_deg)):
        raise FitError("on and off patterns must share the angle grid")
    theta = np.asarray(on.angles_deg, float)
    i_on = dominant_maxima(theta, on.intensity)
    i_off = dominant_maxima(theta, off.intensity)
    used = set()
    ratios, a_on, a_off = [], [], []
    for i in i_on:
        dist = _angular_distance(theta[i], theta[i_off])
        j = int(i_off[np.argmin(dist)])
        if dist.min() > tolerance_deg or j in used:
            raise FitError(f"maximum at {theta[i]:.1f} deg has no partner within {tolerance_deg} deg")
        used.add(j)
        if off.intensity[j] <= 0:
            raise FitError("off-structure maximum is not positive")
        ratios.append(on.intensity[i] / off.intensity[j])
        a_on.append(theta[i])
        a_off.append(theta[j])
    r = np.array(ratios, float)
    return EnhancementStats(np.array(a_on), np.array(a_off), r, float(r.mean()), float(r.std(ddof=1)))


# --- polar fits ----------------------------------------------------------------

D3H_MODEL = "d3h"
STRAINED_MODEL = "strained_d3h"
C2_MODEL = "c2"
POLAR_MODELS = (D3H_MODEL, STRAINED_MODEL, C2_MODEL)


@dataclass(frozen=True)
class PolarFit:
    model: str
    params: dict
    residual_rms: float
    period_mismatch: bool
    harmonics: np.ndarray = field(repr=False)

    def pattern(self, angles_deg) -> pol.PolarPattern:
        return model_pattern(self.model, self.params, angles_deg)


def _co_d3h(theta, chi0, theta0):
    a = np.deg2rad(theta - theta0)
    return chi0 * np.cos(3 * a)


def _co_strained(theta, chi0, theta0, kappa, phi):
    a = np.deg2rad(theta - theta0)
    return chi0 * (np.cos(3 * a) + kappa * np.cos(a + 2 * np.deg2rad(phi - theta0)))


def _co_c2(theta, d22, theta0, r):
    a = np.deg2rad(theta - theta0)
    c, s = np.cos(a), np.sin(a)
    return d22 * (c ** 3 + r * s ** 2 * c)


def model_pattern(model: str, params: dict, angles_deg) -> pol.PolarPattern:
    """Pattern of a fitted model, evaluated through the polarization module."""
    if model == D3H_MODEL:
        return pol.d3h_pattern(params["chi0"], params["theta0_deg"], angles_deg)
    if model == STRAINED_MODEL:
        return pol.strained_d3h_pattern(params["chi0"], params["theta0_deg"], params["strain_magnitude"],
                                        params["strain_angle_deg"], angles_deg)
    if model == C2_MODEL:
        return pol.c2_pattern(params["d22"], params["theta0_deg"], params["d23_ratio"], angles_deg)
    raise FitError(f"unknown polar model {model!r}")


def angular_harmonics(angles_deg, intensity, n_max: int = 12) -> np.ndarray:
    """Amplitudes |c_n| of I(theta) = sum c_n exp(i n theta), n = 0..n_max (least squares)."""
    t = np.deg2rad(np.asarray(angles_deg, float))
    cols = [np.ones_like(t)]
    for n in range(1, n_max + 1):
        cols += [np.cos(n * t), np.sin(n * t)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), np.asarray(intensity, float), rcond=None)
    amps = [abs(coef[0])] + [np.hypot(coef[2 * n - 1], coef[2 * n]) for n in range(1, n_max + 1)]
    return np.array(amps)


def is_sixty_degree_periodic(harmonics: np.ndarray, tolerance: float = 0.05) -> bool:
    ac = harmonics[1:] ** 2
    if ac.sum() == 0:
        return True
    n = np.arange(1, harmonics.size)
    return bool(ac[n % 6 != 0].sum() < tolerance * ac.sum())


def _period_mismatch(model: str, harmonics: np.ndarray) -> bool:
    ac = harmonics[1:]
    if model == C2_MODEL:
        return is_sixty_degree_periodic(harmonics)
    # three-fold models: the 6th harmonic carries the pattern
    return ac.size < 6 or int(np.argmax(ac)) + 1 != 6


def _fit(residual, jac, p0, bounds):
    res = optimize.least_squares(residual, p0, jac=jac, bounds=bounds, x_scale="jac",
                                 xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=MAX_FIT_EVALUATIONS)
    if res.status <= 0:
        raise FitError(f"polar fit did not converge: {res.message}")
    return res


def _best_scale(f, y):
    """Least-squares c for y ~ c f; returns (c, cost)."""
    ff = float(np.dot(f, f))
    c = float(np.dot(f, y) / ff) if ff > 0 else 0.0
    return c, float(np.sum((c * f - y) ** 2))


def polar_fit(data: pol.PolarPattern, model: str) -> PolarFit:
    """Fit a co-polarized pattern with one of the polarization-module models.

    d3h -> (chi0, theta0); strained_d3h -> (chi0, theta0, strain magnitude,
    strain angle); c2 -> (d22, theta0, d23/d22).
    """
    if model not in POLAR_MODELS:
        raise FitError(f"unknown polar model {model!r}")
    if data.analyzer != pol.CO:
        raise FitError("polar_fit expects co-polarized data")
    theta = np.asarray(data.angles_deg, float)
    y = np.asarray(data.intensity, float)
    if theta.size < 12:
        raise FitError("need at least 12 angular samples")
    if np.ptp(theta) < 180.0 - 1e-9:
        raise FitError("angular samples must span at least 180 deg")
    harmonics = angular_harmonics(theta, y)
    scale = float(np.max(np.abs(y))) or 1.0
    ys = y / scale

    def rms(amp):
        return float(np.sqrt(np.mean((amp ** 2 - y) ** 2)))

    d3h = _fit_d3h(theta, ys)
    if model == D3H_MODEL:
        chi, t0 = d3h
        params = {"chi0": abs(chi) * np.sqrt(scale), "theta0_deg": float(t0 % 60.0)}
        return PolarFit(model, params, rms(_co_d3h(theta, params["chi0"], params["theta0_deg"])),
                        _period_mismatch(model, harmonics), harmonics)
    if model == STRAINED_MODEL:
        chi, t0, kappa, phi = _fit_strained(theta, ys, d3h)
        chi_s = abs(chi) * np.sqrt(scale)
        if kappa < 0:
            kappa, phi = -kappa, phi + 90.0
        # theta0 -> theta0 + 60 flips the sign of the whole amplitude
        params = {"chi0": float(chi_s), "theta0_deg": float(t0 % 60.0),
                  "strain_magnitude": float(kappa / (pol.PHOTOELASTIC_P1 + pol.PHOTOELASTIC_P2)),
                  "strain_angle_deg": float(phi % 180.0)}
        amp = _co_strained(theta, chi_s, params["theta0_deg"], kappa, params["strain_angle_deg"])
        return PolarFit(model, params, rms(amp), _period_mismatch(model, harmonics), harmonics)
    d22, t0, r = _fit_c2(theta, ys)
    # the pattern is 180-degree periodic in theta0 and even in d22
    d22 = abs(d22) * np.sqrt(scale)
    params = {"d22": float(d22), "theta0_deg": float(t0 % 180.0), "d23_ratio": float(r)}
    return PolarFit(model, params, rms(_co_c2(theta, d22, t0, r)), _period_mismatch(model, harmonics), harmonics)


def _fit_d3h(theta, y):
    grid = np.arange(0.0, 60.0, 0.5)
    best = None
    for t0 in grid:
        f = _co_d3h(theta, 1.0, t0) ** 2
        c, cost = _best_scale(f, y)
        if c > 0 and (best is None or cost < best[0]):
            best = (cost, np.sqrt(c), t0)
    if best is None:
        raise FitError("no admissible d3h starting point")

    def residual(p):
        return _co_d3h(theta, p[0], p[1]) ** 2 - y

    def jac(p):
        chi, t0 = p
        a = np.deg2rad(theta - t0)
        amp = chi * np.cos(3 * a)
        d_chi = 2 * amp * np.cos(3 * a)
        d_t0 = 2 * amp * chi * 3 * np.sin(3 * a) * np.deg2rad(1.0)
        return np.column_stack([d_chi, d_t0])

    res = _fit(residual, jac, [best[1], best[2]], (-np.inf, np.inf))
    return float(res.x[0]), float(res.x[1])


def _fit_strained(theta, y, d3h):
    chi, t0 = d3h

    def residual(p):
        return _co_strained(theta, *p) ** 2 - y

    def jac(p):
        chi, t0, kappa, phi = p
        a = np.deg2rad(theta - t0)
        b = a + 2 * np.deg2rad(phi - t0)
        amp = chi * (np.cos(3 * a) + kappa * np.cos(b))
        deg = np.deg2rad(1.0)
        d_chi = 2 * amp * (np.cos(3 * a) + kappa * np.cos(b))
        # b depends on t0 through a (-1) and through phi - t0 (-2)
        d_t0 = 2 * amp * chi * (3 * np.sin(3 * a) + 3 * kappa * np.sin(b)) * deg
        d_kappa = 2 * amp * chi * np.cos(b)
        d_phi = 2 * amp * chi * kappa * (-2 * np.sin(b)) * deg
        return np.column_stack([d_chi, d_t0, d_kappa, d_phi])

    starts = [[chi, t0, 0.0, 0.0]]
    for phi in np.arange(0.0, 180.0, 15.0):
        for kappa in (0.05, 0.15, 0.3):
            starts.append([chi, t0, kappa, phi])
    best = None
    for p0 in starts:
        res = _fit(residual, jac, p0, (-np.inf, np.inf))
        if best is None or res.cost < best.cost:
            best = res
    return tuple(float(v) for v in best.x)


def _fit_c2(theta, y):
    best = None
    for t0 in np.arange(0.0, 360.0, 2.0):
        for r in np.linspace(-0.5, 0.5, 11):
            f = _co_c2(theta, 1.0, t0, r) ** 2
            c, cost = _best_scale(f, y)
            if c > 0 and (best is None or cost < best[0]):
                best = (cost, np.sqrt(c), t0, r)
    if best is None:
        raise FitError("no admissible c2 starting point")

    def residual(p):
        return _co_c2(theta, *p) ** 2 - y

    def jac(p):
        d22, t0, r = p
        a = np.deg2rad(theta - t0)
        c, s = np.cos(a), np.sin(a)
        amp = d22 * (c ** 3 + r * s ** 2 * c)
        # d/da (c^3 + r s^2 c) = -3 c^2 s + r (2 s c^2 - s^3)
        da = -3 * c ** 2 * s + r * (2 * s * c ** 2 - s ** 3)
        return np.column_stack([2 * amp * (c ** 3 + r * s ** 2 * c),
                                2 * amp * d22 * da * (-np.deg2rad(1.0)),
                                2 * amp * d22 * s ** 2 * c])

    res = _fit(residual, jac, list(best[1:]), (-np.inf, np.inf))
    return tuple(float(v) for v in res.x)


# --- CSV import -----------------------------------------------------------------

def _read_table(path_or_text) -> tuple[list[str], np.ndarray]:
    text = Path(path_or_text).read_text(encoding="utf-8") if not _looks_like_text(path_or_text) else path_or_text
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise FitError("empty table")
    header = [h.strip() for h in rows[0].split(",")]
    data = []
    for k, line in enumerate(rows[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FitError(f"row {k}: expected {len(header)} columns")
        data.append([float(c) if c.strip() else np.nan for c in cells])
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def _looks_like_text(obj) -> bool:
    return isinstance(obj, str) and "\n" in obj


def read_polar_csv(path_or_text, analyzer: str = pol.CO) -> pol.PolarPattern:
    header, data = _read_table(path_or_text)
    if header != ["theta_deg", "intensity"]:
        raise FitError(f"not a polar-pattern table: header {header}")
    return pol.PolarPattern(data[:, 0], data[:, 1], analyzer)


def read_sweep_csv(path_or_text, axis_names=("axis1", "axis2")) -> SweepResult:
    header, data = _read_table(path_or_text)
    if header != ["axis1", "axis2", "intensity"]:
        raise FitError(f"not a sweep table: header {header}")
    a1, a2, y = data[:, 0], data[:, 1], data[:, 2]
    flagged = np.isnan(y)
    if np.all(np.isnan(a2)):
        return SweepResult((Axis(axis_names[0], a1),), np.where(flagged, np.nan, y), {}, flagged)
    u1, u2 = np.unique(a1), np.unique(a2)
    if u1.size * u2.size != y.size:
        raise FitError("sweep table is not a full Cartesian grid")
    order = np.lexsort((a2, a1))
    return SweepResult((Axis(axis_names[0], u1), Axis(axis_names[1], u2)),
                       y[order].reshape(u1.size, u2.size), {}, flagged[order].reshape(u1.size, u2.size))


def spectrum_from_sweep(sweep: SweepResult) -> Spectrum:
    if sweep.ndim != 1:
        raise FitError("a spectrum needs a one-axis sweep")
    return Spectrum(sweep.axes[0].values, sweep.intensity)
