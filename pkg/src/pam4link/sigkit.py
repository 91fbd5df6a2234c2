"""Signal containers and spectral operations shared by every stage of the link.

All processing is block-based on one period of a periodic capture: filters are
applied as circular convolutions in the frequency domain, so a waveform is
treated as one period of an infinitely repeating signal. Simulations that
need transient-free results should use whole pattern periods (the PRBS
helpers in :mod:`pam4link.txdsp` make this easy).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TypeVar

import numpy as np
import scipy.signal

from pam4link.errors import GridError

_REL_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Waveform:
    """Real-valued sampled electrical signal (volts or amperes)."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("waveform needs a non-empty 1-D sample array")
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", _frozen(x))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class OpticalField:
    """Complex baseband envelope in sqrt(W) around a center wavelength."""

    samples: np.ndarray
    sample_rate: float
    wavelength: float = 1550e-9

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=complex)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("field needs a non-empty 1-D sample array")
        if not np.all(np.isfinite(x)):
            raise ValueError("field samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not 1e-6 < self.wavelength < 2e-6:
            raise ValueError("wavelength must lie between 1 um and 2 um")
        object.__setattr__(self, "samples", _frozen(x))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> np.ndarray:
        """Instantaneous power in watts."""
        return np.abs(self.samples) ** 2

    @property
    def frequency(self) -> float:
        """Optical carrier frequency in hertz."""
        return 299_792_458.0 / self.wavelength

    def with_samples(self, samples) -> "OpticalField":
        return OpticalField(samples, self.sample_rate, self.wavelength)


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex gain sampled on a strictly increasing frequency grid (Hz)."""

    freqs: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        g = np.asarray(self.gains, dtype=complex)
        if f.ndim != 1 or f.shape != g.shape:
            raise ValueError("freqs and gains must be 1-D arrays of equal length")
        if f.size < 2:
            raise ValueError("a frequency response needs at least two points")
        if np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if not np.all(np.isfinite(g)):
            raise GridError("frequency response gains must be finite")
        object.__setattr__(self, "freqs", _frozen(f))
        object.__setattr__(self, "gains", _frozen(g))

    def __len__(self) -> int:
        return self.freqs.size

    def __mul__(self, other: "FrequencyResponse") -> "FrequencyResponse":
        """Cascade of two responses, evaluated on this response's grid."""
        return FrequencyResponse(self.freqs, self.gains * other.at(self.freqs))

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.gains))

    @property
    def phase(self) -> np.ndarray:
        return np.unwrap(np.angle(self.gains))

    def at(self, f) -> np.ndarray:
        """Linear interpolation of the complex gain; raises outside the grid."""
        f = np.asarray(f, dtype=float)
        span = max(abs(self.freqs[0]), abs(self.freqs[-1]), 1.0)
        if f.size and (
            f.min() < self.freqs[0] - _REL_TOL * span
            or f.max() > self.freqs[-1] + _REL_TOL * span
        ):
            raise GridError(
                f"response grid [{self.freqs[0]:.4g}, {self.freqs[-1]:.4g}] Hz does "
                f"not cover requested [{f.min():.4g}, {f.max():.4g}] Hz"
            )
        fc = np.clip(f, self.freqs[0], self.freqs[-1])
        re = np.interp(fc, self.freqs, self.gains.real)
        im = np.interp(fc, self.freqs, self.gains.imag)
        return re + 1j * im

    def normalized(self, f_ref: float | None = None) -> "FrequencyResponse":
        """Scale so the gain at ``f_ref`` (default: first grid point) is 1."""
        ref = self.gains[0] if f_ref is None else self.at([f_ref])[0]
        return FrequencyResponse(self.freqs, self.gains / ref)

    def to_csv(self, path) -> None:
        """Write ``freq_hz, gain_db, phase_rad`` rows."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "gain_db", "phase_rad"])
            mag = np.maximum(np.abs(self.gains), 1e-300)
            for f, m, p in zip(self.freqs, 20 * np.log10(mag), np.angle(self.gains)):
                w.writerow([repr(float(f)), repr(float(m)), repr(float(p))])

    @classmethod
    def from_csv(cls, path) -> "FrequencyResponse":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        mag = 10 ** (data[:, 1] / 20)
        return cls(data[:, 0], mag * np.exp(1j * data[:, 2]))


Signal = TypeVar("Signal", Waveform, OpticalField)


def spectrum_freqs(x: Waveform | OpticalField) -> np.ndarray:
    """Frequency grid of the transform used by :func:`apply_frequency_response`."""
    n = len(x)
    if isinstance(x, Waveform):
        return np.fft.rfftfreq(n, 1 / x.sample_rate)
    return np.fft.fftfreq(n, 1 / x.sample_rate)


def apply_frequency_response(x: Signal, h: FrequencyResponse) -> Signal:
    """Filter ``x`` by ``h`` with circular (one-period) convolution.

    The complex gain is linearly interpolated onto the DFT grid of ``x``. Real
    waveforms only need ``h`` on ``[0, fs/2]`` and stay real; optical fields
    need ``h`` on ``[-fs/2, fs/2]``. Length is preserved.
    """
    n = len(x)
    f = spectrum_freqs(x)
    try:
        g = h.at(f)
    except GridError as exc:
        raise GridError(f"cannot filter {type(x).__name__}: {exc}") from None
    if isinstance(x, Waveform):
        return x.with_samples(np.fft.irfft(np.fft.rfft(x.samples) * g, n))
    return x.with_samples(np.fft.ifft(np.fft.fft(x.samples) * g))


def apply_gain(x: Signal, gain_fn) -> Signal:
    """Filter with a callable ``gain_fn(freqs)`` evaluated exactly on the DFT grid."""
    f = spectrum_freqs(x)
    g = np.asarray(gain_fn(f))
    if isinstance(x, Waveform):
        return x.with_samples(np.fft.irfft(np.fft.rfft(x.samples) * g, len(x)))
    return x.with_samples(np.fft.ifft(np.fft.fft(x.samples) * g))


def resample(x: Waveform, new_rate: float) -> Waveform:
    """Band-limited (Fourier) resampling of one signal period.

    The output length is ``round(len(x) * new_rate / x.sample_rate)`` so the
    record duration is kept; the returned ``sample_rate`` is the exact rate
    implied by that length, which differs from ``new_rate`` only when the
    record does not hold a whole number of new-rate samples.
    """
    if not new_rate > 0:
        raise ValueError("new_rate must be positive")
    n_new = max(1, int(round(len(x) * new_rate / x.sample_rate)))
    if n_new == len(x):
        return x
    y = scipy.signal.resample(x.samples, n_new)
    return Waveform(y, n_new / x.duration)


def resample_to_length(x: Waveform, n_new: int) -> Waveform:
    """Fourier resampling to an exact sample count over the same duration."""
    if n_new == len(x):
        return x
    return Waveform(scipy.signal.resample(x.samples, n_new), n_new / x.duration)


def resample_field(x: OpticalField, n_new: int) -> OpticalField:
    if n_new == len(x):
        return x
    y = scipy.signal.resample(x.samples, n_new)
    return OpticalField(y, n_new * x.sample_rate / len(x), x.wavelength)


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10 ** (p_dbm / 10)


def watts_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        return -math.inf
    return 10 * math.log10(p_w / 1e-3)


def power_dbm(x: OpticalField) -> float:
    """Mean optical power in dBm; an all-zero field returns ``-inf``."""
    return watts_to_dbm(float(np.mean(x.power)))


def lowpass_response(freqs, f3db: float, kind: str = "bessel", order: int = 4) -> np.ndarray:
    """Complex gain of a normalized analog low-pass at ``freqs`` (Hz).

    ``bessel`` is the maximally flat delay design with its -3 dB point at
    ``f3db``. ``butter-mag`` is a zero-phase Butterworth magnitude, used for
    instruments that apply their own phase correction.
    """
    f = np.abs(np.asarray(freqs, dtype=float))
    if kind == "bessel":
        b, a = scipy.signal.bessel(order, 2 * np.pi * f3db, analog=True, norm="mag")
        _, h = scipy.signal.freqs(b, a, worN=2 * np.pi * f)
        return np.where(np.asarray(freqs) < 0, np.conj(h), h)
    if kind == "butter-mag":
        return 1 / np.sqrt(1 + (f / f3db) ** (2 * order))
    raise ValueError(f"unknown low-pass kind {kind!r}")


def first_null(
    h: FrequencyResponse,
    f_min: float = 0.0,
    f_max: float | None = None,
    min_prominence_db: float = 3.0,
) -> tuple[float, float] | None:
    """Locate the first spectral null of ``|h|`` above ``f_min``.

    Returns ``(frequency, depth_db)`` where depth is relative to the gain at
    the first grid point, or ``None`` when no local minimum with the required
    prominence exists. The location is refined by a parabola through
    ``|h|^2`` on the three grid points around the minimum, which is exact for
    the quadratic shape of a simple zero.
    """
    f = h.freqs
    mask = f >= f_min
    if f_max is not None:
        mask &= f <= f_max
    idx = np.flatnonzero(mask)
    if idx.size < 3:
        return None
    mag_db = h.magnitude_db
    mag_db = np.where(np.isfinite(mag_db), mag_db, -400.0)
    peaks, _ = scipy.signal.find_peaks(-mag_db[idx], prominence=min_prominence_db)
    if peaks.size == 0:
        return None
    k = idx[peaks[0]]
    p2 = np.abs(h.gains[k - 1 : k + 2]) ** 2
    denom = p2[0] - 2 * p2[1] + p2[2]
    shift = 0.0 if denom <= 0 else 0.5 * (p2[0] - p2[2]) / denom
    shift = float(np.clip(shift, -1, 1))
    df = f[k + 1] - f[k] if shift > 0 else f[k] - f[k - 1]
    f_null = f[k] + shift * df
    depth = mag_db[k] - mag_db[0]
    return float(f_null), float(depth)
