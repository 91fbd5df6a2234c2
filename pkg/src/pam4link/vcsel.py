"""Behavioral model of the 1550 nm single-mode VCSEL.

The static L-I curve is a parabola through threshold that peaks at the thermal
rollover point. Fast modulation does not follow the thermal rollover: the
dynamic intensity path is the straight line through threshold and the static
operating point, shaped by a damped two-pole relaxation response and a
parasitic pole. Chirp follows the transient + adiabatic rate-equation form

    dphi/dt = (alpha_h / 2) * (d ln p / dt + kappa * p)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numba
import numpy as np
from scipy.optimize import brentq

from pam4link.errors import CalibrationError
from pam4link.fiberlink import McfParams, disperse, predict_notch, propagate_core
from pam4link.sigkit import (
    FrequencyResponse,
    OpticalField,
    Waveform,
    apply_gain,
    first_null,
)

_DEFAULT_V_CURVE = (
    (0.0, 0.0),
    (0.5e-3, 0.85),
    (1.5e-3, 1.02),
    (4e-3, 1.28),
    (8e-3, 1.62),
    (12e-3, 1.98),
)


@dataclass(frozen=True)
class VcselParams:
    """VCSEL model parameters (SI units).

    ``f_r`` is the relaxation-oscillation frequency at ``bias``; it scales
    with sqrt(I - i_th). Damping is ``gamma_0 + k_factor * f_r**2`` (1/s).
    ``kappa`` is the adiabatic chirp coefficient in rad/s per watt.
    """

    i_th: float = 1.5e-3
    i_rollover: float = 8e-3
    p_max: float = 1.5e-3
    v_curve: tuple = _DEFAULT_V_CURVE
    alpha_h: float = 12.0
    kappa: float = 0.0
    f_r: float = 15.984e9
    k_factor: float = 0.25e-9
    gamma_0: float = 5e9
    f_p: float = 30e9
    bias: float = 7.8e-3
    r_drive: float = 100.0
    wavelength: float = 1550e-9
    skew_tau: float = 0.0
    skew_asymmetry: float = 0.5
    clip_warn_fraction: float = 0.01

    def __post_init__(self):
        if not 0 < self.i_th < self.i_rollover:
            raise ValueError("need 0 < i_th < i_rollover")
        if self.alpha_h < 0 or self.kappa < 0:
            raise ValueError("alpha_h and kappa must be non-negative")
        if min(self.f_r, self.f_p, self.gamma_0 + self.k_factor * self.f_r**2) <= 0:
            raise ValueError("f_r, f_p and damping must be positive")
        if self.r_drive <= 0 or self.p_max <= 0:
            raise ValueError("r_drive and p_max must be positive")
        v = np.asarray(self.v_curve, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or np.any(np.diff(v[:, 0]) <= 0) or np.any(np.diff(v[:, 1]) <= 0):
            raise ValueError("v_curve must be strictly increasing (I, V) pairs")
        object.__setattr__(self, "v_curve", tuple(map(tuple, v.tolist())))

    @property
    def gamma_d(self) -> float:
        """Damping rate at the operating bias (1/s)."""
        return self.damping(self.bias)

    def relaxation_frequency(self, bias: float) -> float:
        return self.f_r * math.sqrt((bias - self.i_th) / (self.bias - self.i_th))

    def damping(self, bias: float) -> float:
        return self.gamma_0 + self.k_factor * self.relaxation_frequency(bias) ** 2


def _static_power(params: VcselParams, i) -> np.ndarray:
    i = np.asarray(i, dtype=float)
    span = params.i_rollover - params.i_th
    p = params.p_max * (1 - ((i - params.i_rollover) / span) ** 2)
    return np.where(i > params.i_th, np.maximum(p, 0.0), 0.0)


def static_liv(params: VcselParams, i):
    """Static output power (W) and voltage (V) at drive current ``i`` (A)."""
    i_arr = np.asarray(i, dtype=float)
    if np.any(i_arr < 0):
        raise ValueError("current must be non-negative")
    v_tab = np.asarray(params.v_curve)
    v = np.interp(i_arr, v_tab[:, 0], v_tab[:, 1])
    slope = (v_tab[-1, 1] - v_tab[-2, 1]) / (v_tab[-1, 0] - v_tab[-2, 0])
    v = np.where(i_arr > v_tab[-1, 0], v_tab[-1, 1] + slope * (i_arr - v_tab[-1, 0]), v)
    p = _static_power(params, i_arr)
    if np.ndim(i) == 0:
        return float(p), float(v)
    return p, v


def dynamic_slope(params: VcselParams, bias: float) -> float:
    """Slope (W/A) of the isothermal line through threshold and the bias point."""
    return float(_static_power(params, bias)) / (bias - params.i_th)


def s21_gain(params: VcselParams, bias: float, f) -> np.ndarray:
    """Complex small-signal intensity response at frequencies ``f`` (Hz)."""
    f = np.asarray(f, dtype=float)
    fr = params.relaxation_frequency(bias)
    gamma = params.damping(bias)
    h = fr**2 / (fr**2 - f**2 + 1j * f * gamma / (2 * np.pi))
    return h / (1 + 1j * f / params.f_p)


def _check_bias(params: VcselParams, bias: float) -> None:
    if not params.i_th < bias <= params.i_rollover:
        raise ValueError(
            f"bias {bias * 1e3:.3g} mA outside (i_th, i_rollover] = "
            f"({params.i_th * 1e3:.3g}, {params.i_rollover * 1e3:.3g}] mA"
        )


def small_signal_s21(params: VcselParams, bias: float | None = None, freqs=None) -> FrequencyResponse:
    """Small-signal S21, normalized to 0 dB at DC."""
    bias = params.bias if bias is None else bias
    _check_bias(params, bias)
    f = np.linspace(0, 100e9, 4001) if freqs is None else np.asarray(freqs, dtype=float)
    return FrequencyResponse(f, s21_gain(params, bias, f))


def bandwidth_3db(params: VcselParams, bias: float | None = None) -> float:
    """-3 dB frequency of :func:`small_signal_s21` (first downward crossing)."""
    bias = params.bias if bias is None else bias
    _check_bias(params, bias)
    f = np.linspace(1e6, 200e9, 200001)
    mag = np.abs(s21_gain(params, bias, f))
    target = 10 ** (-3 / 20)
    idx = np.flatnonzero(mag < target)
    if idx.size == 0:
        return math.inf
    k = idx[0]
    return float(brentq(lambda x: abs(s21_gain(params, bias, x)) - target, f[k - 1], f[k]))


def calibrate_bandwidth(params: VcselParams, target: float = 20e9, at_bias: float = 7e-3) -> VcselParams:
    """Return params whose 3-dB bandwidth at ``at_bias`` equals ``target``."""

    def err(fr):
        return bandwidth_3db(replace(params, f_r=fr), at_bias) - target

    # bandwidth peaks and then falls as damping grows with f_r**2; solve on
    # the rising branch
    grid = np.geomspace(1e9, 200e9, 60)
    errs = np.array([err(fr) for fr in grid])
    up = np.flatnonzero((errs[:-1] < 0) & (errs[1:] >= 0))
    if up.size == 0:
        raise CalibrationError(f"no f_r gives a {target / 1e9:.3g} GHz bandwidth at {at_bias * 1e3:.3g} mA")
    k = up[0]
    fr = brentq(err, grid[k], grid[k + 1], xtol=1e3)
    return replace(params, f_r=fr)


@numba.njit(cache=True)
def _skew_filter(x, dt, tau, asym, ref):
    # first-order tracking whose time constant grows on the low-power side
    y = np.empty_like(x)
    y[0] = x[0]
    for k in range(1, x.size):
        t = tau * (1.0 + asym * (ref - y[k - 1]) / ref)
        t = max(t, 1e-3 * tau)
        a = dt / (t + dt)
        y[k] = y[k - 1] + a * (x[k] - y[k - 1])
    return y


def intensity(params: VcselParams, drive: Waveform, bias: float | None = None) -> np.ndarray:
    """Optical power p(t) for a drive voltage waveform, clipped at zero."""
    bias = params.bias if bias is None else bias
    _check_bias(params, bias)
    delta_i = drive.with_samples(drive.samples / params.r_drive)
    delta_i = apply_gain(delta_i, lambda f: s21_gain(params, bias, f))
    p0 = float(_static_power(params, bias))
    p = p0 + dynamic_slope(params, bias) * delta_i.samples
    if params.skew_tau > 0:
        p = _skew_filter(p, 1 / drive.sample_rate, params.skew_tau, params.skew_asymmetry, p0)
    clipped = np.mean(p < 0)
    if clipped > params.clip_warn_fraction:
        warnings.warn(f"VCSEL intensity clipped on {clipped:.1%} of samples", RuntimeWarning, stacklevel=3)
    return np.maximum(p, 0.0)


def modulate(
    params: VcselParams,
    drive: Waveform,
    bias: float | None = None,
    remove_offset: bool = False,
) -> OpticalField:
    """Convert a drive voltage waveform into the chirped optical field.

    The adiabatic term integrates ``kappa * p``; its mean part is a static
    carrier-frequency offset (a linear phase ramp). ``remove_offset`` drops
    that ramp, which keeps the field periodic for circular simulations and
    does not change anything a square-law receiver sees.
    """
    p = intensity(params, drive, bias)
    fs = drive.sample_rate
    floor = 1e-9 * max(float(np.mean(p)), 1e-30)
    phi = np.log(np.maximum(p, floor))
    if params.kappa and params.alpha_h:
        p_mean = float(np.mean(p))
        spec = np.fft.rfft(p - p_mean)
        f = np.fft.rfftfreq(p.size, 1 / fs)
        spec[1:] /= 1j * 2 * np.pi * f[1:]
        spec[0] = 0
        phi = phi + params.kappa * np.fft.irfft(spec, p.size)
        if not remove_offset:
            phi = phi + params.kappa * p_mean * drive.times
    phi = 0.5 * params.alpha_h * phi
    phi -= phi.mean()
    return OpticalField(np.sqrt(p) * np.exp(1j * phi), fs, params.wavelength)


def multitone_probe(
    spacing: float,
    f_max: float,
    sample_rate: float,
    rms: float,
    f_min: float | None = None,
) -> tuple[Waveform, np.ndarray]:
    """Newman-phased multitone on odd multiples of ``spacing / 2``.

    Second-order distortion products of such a probe land on even bins only,
    so they never corrupt the measured tones. Returns the waveform (one
    period of 2/spacing seconds) and the tone bin indices.
    """
    period = 2 / spacing
    n = int(round(sample_rate * period))
    n += n % 2
    bins = np.arange(1, int(f_max / (spacing / 2)) + 1, 2)
    if f_min is not None:
        bins = bins[bins * spacing / 2 >= f_min]
    if bins.size == 0 or bins[-1] >= n // 2:
        raise ValueError("probe tones must lie below the Nyquist frequency")
    k = np.arange(bins.size)
    spec = np.zeros(n // 2 + 1, dtype=complex)
    spec[bins] = np.exp(1j * np.pi * k**2 / bins.size)
    x = np.fft.irfft(spec, n)
    x *= rms / np.sqrt(np.mean(x**2))
    return Waveform(x, n / period), bins


def tone_ratio(sent: np.ndarray, received: np.ndarray, bins: np.ndarray) -> np.ndarray:
    return np.fft.rfft(received)[bins] / np.fft.rfft(sent)[bins]


def link_response(
    params: VcselParams,
    d_total: float,
    f_max: float = 45e9,
    spacing: float = 100e6,
    mcf: McfParams | None = None,
    relative_rms: float = 0.01,
) -> FrequencyResponse:
    """Simulated small-signal response of modulate -> fiber -> square law.

    A multitone drive whose current rms is ``relative_rms`` of
    ``bias - i_th`` is sent through :func:`modulate`; the field then sees
    ``d_total`` ps/nm of dispersion (or :func:`propagate_core` on core 0 of
    ``mcf``, with ripple disabled, when given) and is square-law detected.
    The result is normalized to the lowest tone.
    """
    fs = max(4 * f_max, 40e9)
    rms_v = relative_rms * (params.bias - params.i_th) * params.r_drive
    drive, bins = multitone_probe(spacing, f_max, fs, rms_v)
    field = modulate(params, drive, remove_offset=True)
    if mcf is None:
        out = disperse(field, d_total)
    else:
        out = propagate_core(field, replace(mcf, core_ripple_db=0.0), 0)
    det = np.abs(out.samples) ** 2
    h = tone_ratio(drive.samples, det, bins)
    f = bins / drive.duration
    return FrequencyResponse(f, h / h[0])


def simulated_null(params: VcselParams, d_total: float, f_max: float | None = None, **kw):
    """``(frequency, depth_db)`` of the first null of :func:`link_response`."""
    if f_max is None:
        f_max = 1.6 * predict_notch(params.alpha_h, d_total, params.wavelength)
    return first_null(link_response(params, d_total, f_max=f_max, **kw), min_prominence_db=1.0)


def calibrate_kappa(
    params: VcselParams,
    target_notch: float,
    d_total: float,
    wavelength: float = 1550e-9,
    kappa_max: float | None = None,
    rtol: float = 0.002,
) -> float:
    """Adiabatic chirp coefficient placing the first null at ``target_notch``.

    Bisection on ``kappa`` in ``[0, kappa_max]`` against the simulated
    small-signal response. Raises :class:`CalibrationError` when the target is
    not bracketed; the message reports the null positions at both ends.
    """
    params = replace(params, wavelength=wavelength)
    if params.alpha_h == 0:
        raise CalibrationError("null position is insensitive to kappa when alpha_h = 0")
    p0 = float(_static_power(params, params.bias))
    if kappa_max is None:
        kappa_max = 2 * np.pi * 50e9 / p0
    f_max = 1.6 * max(target_notch, predict_notch(params.alpha_h, d_total, wavelength))

    def null_at(kappa):
        r = simulated_null(replace(params, kappa=kappa), d_total, f_max=f_max)
        return None if r is None else r[0]

    lo, hi = 0.0, kappa_max
    f_lo, f_hi = null_at(lo), null_at(hi)

    def describe(f):
        return "no null" if f is None else f"{f / 1e9:.3f} GHz"

    def fail():
        return CalibrationError(
            f"no kappa in [{lo:.4g}, {hi:.4g}] rad/(s W) reaches {target_notch / 1e9:.3f} GHz: "
            f"null is {describe(f_lo)} at kappa={lo:.4g} and {describe(f_hi)} at kappa={hi:.4g}"
        )

    if f_lo is None:
        raise fail()
    if abs(f_lo - target_notch) <= rtol * target_notch:
        return 0.0
    # larger kappa only lowers and fills the null
    if f_lo < target_notch:
        raise fail()
    if f_hi is not None and f_hi > target_notch:
        raise fail()
    a, b = lo, hi
    for _ in range(80):
        mid = 0.5 * (a + b)
        f_mid = null_at(mid)
        if f_mid is None or f_mid < target_notch:
            b = mid
        else:
            a = mid
            if abs(f_mid - target_notch) <= rtol * target_notch:
                return mid
    f_a = null_at(a)
    if f_a is None or abs(f_a - target_notch) > 0.02 * target_notch:
        raise fail()
    return a


def calibrate_chirp(
    params: VcselParams,
    target_notch: float,
    target_depth_db: float,
    d_total: float,
    wavelength: float = 1550e-9,
    rtol: float = 0.002,
) -> VcselParams:
    """Fit (alpha_h, kappa) so the simulated response has its first null at
    ``target_notch`` with depth ``target_depth_db`` relative to the lowest tone.

    ``alpha_h`` sets the null position through tan(theta) = 1/alpha_h;
    ``kappa`` fills the null and sets its depth. Nested bisection.
    """
    params = replace(params, wavelength=wavelength)
    p0 = float(_static_power(params, params.bias))

    def fit_alpha(kappa):
        def null(alpha):
            f_max = 1.6 * max(target_notch, predict_notch(alpha, d_total, wavelength))
            return simulated_null(replace(params, alpha_h=alpha, kappa=kappa), d_total, f_max=f_max)

        a, b = 0.05, 60.0  # null frequency decreases with alpha
        r_a, r_b = null(a), null(b)
        if r_a is None or r_b is None or not r_b[0] < target_notch < r_a[0]:
            raise CalibrationError(f"alpha_h search cannot reach {target_notch / 1e9:.3f} GHz at kappa={kappa:.4g}")
        r = r_a
        for _ in range(60):
            mid = 0.5 * (a + b)
            r = null(mid)
            if r is None or r[0] < target_notch:
                b = mid
            else:
                a = mid
            if r is not None and abs(r[0] - target_notch) <= rtol * target_notch:
                return mid, r
        return a, null(a)

    alpha, r = fit_alpha(0.0)
    if r[1] > target_depth_db:
        raise CalibrationError("null is already shallower than the target depth without adiabatic chirp")

    def depth(kappa):
        try:
            return fit_alpha(kappa)
        except CalibrationError:
            return None, None  # null filled in completely

    # grow kappa geometrically until the null is shallower than the target
    k_lo, k_hi = 0.0, 1e-4 * 2 * np.pi * 1e9 / p0
    while True:
        a_hi, r_hi = depth(k_hi)
        if r_hi is None or r_hi[1] >= target_depth_db:
            break
        k_lo, alpha, r = k_hi, a_hi, r_hi
        k_hi *= 4
        if k_hi > 2 * np.pi * 1e12 / p0:
            raise CalibrationError("depth target not reachable for any kappa")
    k_lo = k_lo or k_hi / 4
    for _ in range(60):
        k_mid = math.sqrt(k_lo * k_hi)
        a_mid, r_mid = depth(k_mid)
        if r_mid is None or r_mid[1] > target_depth_db:
            k_hi = k_mid
        else:
            k_lo = k_mid
        if r_mid is not None and abs(r_mid[1] - target_depth_db) < 0.05:
            return replace(params, alpha_h=a_mid, kappa=k_mid)
    a_lo, _ = depth(k_lo)
    return replace(params, alpha_h=a_lo, kappa=k_lo)
