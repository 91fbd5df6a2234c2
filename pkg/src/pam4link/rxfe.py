"""Receiver front end: AGC pre-amplifier with ASE, optical band-pass filter,
variable attenuator, square-law PIN photodiode and the real-time scope ADC."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import Planck, elementary_charge

from pam4link import txdsp
from pam4link.errors import GridError
from pam4link.sigkit import (
    OpticalField,
    Waveform,
    apply_gain,
    dbm_to_watts,
    lowpass_response,
    power_dbm,
    resample,
)

EDFA_MIN_INPUT_DBM = -40.0
OSNR_REF_BW = 12.5e9  # 0.1 nm at 1550 nm


@dataclass(frozen=True)
class RxParams:
    """Receiver parameters.

    ``thermal_noise_psd`` is the one-sided input-referred current noise
    density (A^2/Hz). ``ase`` and ``electrical_noise`` switch the optical and
    electrical noise sources independently.
    """

    edfa_pout: float = 7.0
    edfa_nf: float = 5.0
    obpf_bw: float = 100e9
    obpf_order: int = 2
    pd_responsivity: float = 0.5
    pd_bandwidth: float = 90e9
    thermal_noise_psd: float = 2.24e-22
    adc_rate: float = 160e9
    adc_bandwidth: float = 63e9
    adc_filter_order: int = 12
    adc_bits: int = 8
    ase: bool = True
    electrical_noise: bool = True

    def __post_init__(self):
        for name in ("obpf_bw", "pd_bandwidth", "adc_rate", "adc_bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.pd_responsivity <= 1.2:
            raise ValueError("pd_responsivity must be in (0, 1.2] A/W")
        if self.thermal_noise_psd < 0 or self.edfa_nf < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.adc_bits < 1 or self.obpf_order < 1 or self.adc_filter_order < 1:
            raise ValueError("adc_bits and filter orders must be >= 1")

    @property
    def noiseless(self) -> "RxParams":
        return replace(self, ase=False, electrical_noise=False)


def obpf_gain(params: RxParams, f) -> np.ndarray:
    """Super-Gaussian optical filter with ``obpf_bw`` full width at half power."""
    f = np.asarray(f, dtype=float)
    return np.sqrt(0.5 ** ((2 * np.abs(f) / params.obpf_bw) ** (2 * params.obpf_order)))


def ase_psd(gain: float, nf_db: float, frequency: float) -> float:
    """Single-polarization ASE density (W/Hz) at the amplifier output."""
    return max(10 ** (nf_db / 10) * gain / 2 - 1, 0.0) * Planck * frequency


def edfa_osnr_db(p_in_dbm: float, params: RxParams, wavelength: float = 1550e-9) -> float:
    """OSNR (dB, in a 0.1 nm band) for an input power, neglecting filter loss."""
    nu = 299_792_458.0 / wavelength
    p_in = dbm_to_watts(p_in_dbm)
    nf = 10 ** (params.edfa_nf / 10)
    # AGC: G * p_in + S_ase(G) * B_ref ~ pout, solved for G
    p_out = dbm_to_watts(params.edfa_pout)
    g = (p_out + Planck * nu * OSNR_REF_BW) / (p_in + nf / 2 * Planck * nu * OSNR_REF_BW)
    noise = ase_psd(g, params.edfa_nf, nu) * OSNR_REF_BW
    return math.inf if noise == 0 else 10 * math.log10(g * p_in / noise)


def edfa_agc(field: OpticalField, params: RxParams, rng_seed: int | None = 0) -> OpticalField:
    """Amplify to a fixed output power, add ASE, then band-pass filter.

    The gain is chosen so that the total filtered output (signal plus
    in-band ASE) has mean power ``edfa_pout``. ASE is circular white Gaussian
    noise over the full simulation band.
    """
    p_in = power_dbm(field)
    if not p_in > EDFA_MIN_INPUT_DBM:
        raise ValueError(f"EDFA input {p_in:.2f} dBm is below the {EDFA_MIN_INPUT_DBM} dBm floor")
    fs = field.sample_rate
    nu = field.frequency
    sig = apply_gain(field, lambda f: obpf_gain(params, f))
    p_sig = float(np.mean(sig.power))
    p_out = dbm_to_watts(params.edfa_pout)
    if not params.ase:
        return sig.with_samples(sig.samples * math.sqrt(p_out / p_sig))
    h2 = obpf_gain(params, np.fft.fftfreq(len(field), 1 / fs)) ** 2
    b_eff = float(np.mean(h2)) * fs  # noise-equivalent bandwidth on this grid
    nf = 10 ** (params.edfa_nf / 10)
    g = (p_out + Planck * nu * b_eff) / (p_sig + nf / 2 * Planck * nu * b_eff)
    s_ase = ase_psd(g, params.edfa_nf, nu)
    rng = np.random.default_rng(rng_seed)
    n = len(field)
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    noise *= math.sqrt(s_ase * fs / 2)
    noisy = field.with_samples(math.sqrt(g) * field.samples + noise)
    out = apply_gain(noisy, lambda f: obpf_gain(params, f))
    # AGC loop closes on the measured total power
    return out.with_samples(out.samples * math.sqrt(p_out / float(np.mean(out.power))))


def voa_set_rop(field: OpticalField, target_rop: float) -> OpticalField:
    """Attenuate uniformly so the mean power equals ``target_rop`` dBm."""
    current = power_dbm(field)
    if target_rop > current + 1e-9:
        raise ValueError(f"VOA cannot raise power from {current:.3f} to {target_rop:.3f} dBm")
    if target_rop == current:
        return field
    return field.with_samples(field.samples * 10 ** ((target_rop - current) / 20))


def photodetect(field: OpticalField, params: RxParams, rng_seed: int | None = 0) -> Waveform:
    """Square-law detection with thermal and shot noise, then the PD low-pass."""
    fs = field.sample_rate
    if fs < 2 * params.pd_bandwidth:
        raise GridError(
            f"field grid {fs / 1e9:.1f} GSa/s is too coarse for a {params.pd_bandwidth / 1e9:.0f} GHz photodiode"
        )
    i = params.pd_responsivity * field.power
    if params.electrical_noise:
        rng = np.random.default_rng(rng_seed)
        psd = params.thermal_noise_psd + 2 * elementary_charge * float(np.mean(i))
        i = i + rng.standard_normal(i.size) * math.sqrt(psd * fs / 2)
    out = Waveform(i, fs)
    return apply_gain(out, lambda f: lowpass_response(f, params.pd_bandwidth, "bessel", 2))


def adc_response(params: RxParams, f) -> np.ndarray:
    """Scope front-end magnitude (zero phase, Butterworth shape)."""
    return lowpass_response(f, params.adc_bandwidth, "butter-mag", params.adc_filter_order)


def adc_capture(i: Waveform, params: RxParams) -> Waveform:
    """Band-limit, resample to ``adc_rate`` and quantize with auto-ranging."""
    x = apply_gain(i, lambda f: adc_response(params, f))
    x = resample(x, params.adc_rate)
    lo, hi = float(x.samples.min()), float(x.samples.max())
    if hi == lo:
        return x
    mid, half = (hi + lo) / 2, (hi - lo) / 2
    return x.with_samples(mid + txdsp.quantize(x.samples - mid, params.adc_bits, half))


to_csv = txdsp.to_csv
from_csv = txdsp.from_csv
