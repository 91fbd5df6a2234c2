"""Seven-core multicore fiber: dispersion, loss, fan-in/fan-out, per-core
ripple, inter-core crosstalk and the closed-form chirp/dispersion notch."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from pam4link.errors import GridError
from pam4link.sigkit import FrequencyResponse, OpticalField, apply_gain

C_LIGHT = 299_792_458.0
PS_PER_NM_TO_SI = 1e-3  # ps/nm -> s/m


@dataclass(frozen=True)
class McfParams:
    """Multicore fiber link description.

    ``dispersion`` is in ps/(nm km), ``length`` in meters, ``dcm_dispersion``
    in ps/nm (0 disables the compensation module). ``fan_modules`` counts the
    fan-in and fan-out devices, each contributing ``fanio_loss`` dB.
    """

    n_cores: int = 7
    dispersion: float = 17.1
    length: float = 1000.0
    attenuation: float = 0.2
    xt_per_100km: float = -45.0
    fanio_loss: float = 1.5
    fanio_xt: float = -50.0
    fan_modules: int = 2
    core_ripple_db: float = 0.75
    ripple_span: float = 35e9
    variation_seed: int = 2018
    dcm_dispersion: float = 0.0
    dcm_loss: float = 0.0

    def __post_init__(self):
        if self.n_cores < 1:
            raise ValueError("n_cores must be >= 1")
        if self.dispersion <= 0:
            raise ValueError("dispersion must be positive")
        if self.attenuation < 0 or self.length < 0:
            raise ValueError("attenuation and length must be non-negative")
        if self.xt_per_100km >= 0 or self.fanio_xt >= 0:
            raise ValueError("crosstalk levels must be negative dB values")

    @property
    def d_total(self) -> float:
        """Net accumulated dispersion in ps/nm."""
        return self.dispersion * self.length / 1e3 + self.dcm_dispersion

    @property
    def loss_db(self) -> float:
        return self.attenuation * self.length / 1e3 + self.fan_modules * self.fanio_loss + self.dcm_loss


def dispersion_phase(d_total: float, wavelength: float, f) -> np.ndarray:
    """theta(f) = pi * lambda^2 * D_total * f^2 / c with D_total in ps/nm."""
    f = np.asarray(f, dtype=float)
    return np.pi * wavelength**2 * d_total * PS_PER_NM_TO_SI * f**2 / C_LIGHT


def dispersion_gain(d_total: float, wavelength: float, f) -> np.ndarray:
    # numpy's forward FFT is e^{-j2pi f t}; exp(+j theta) makes negative
    # baseband frequencies (longer wavelengths) arrive later for D > 0.
    return np.exp(1j * dispersion_phase(d_total, wavelength, f))


def dispersion_response(d_total: float, wavelength: float, freqs) -> FrequencyResponse:
    """All-pass baseband response of ``d_total`` ps/nm of net dispersion."""
    f = np.asarray(freqs, dtype=float)
    return FrequencyResponse(f, dispersion_gain(d_total, wavelength, f))


def disperse(field: OpticalField, d_total: float) -> OpticalField:
    """Apply dispersion evaluated exactly on the field's DFT grid."""
    if d_total == 0:
        return field
    return apply_gain(field, lambda f: dispersion_gain(d_total, field.wavelength, f))


def predict_notch(alpha_h: float, d_total: float, wavelength: float = 1550e-9) -> float:
    """First power-fading null (Hz) of a transient-chirped source.

    Solves tan(theta) = 1/alpha_h, i.e. theta* = arctan(1/alpha_h), which is
    pi/2 for a chirp-free source.
    """
    if d_total <= 0:
        raise ValueError("dispersion must be positive to produce a notch")
    if alpha_h < 0:
        raise ValueError("alpha_h must be non-negative")
    theta = math.pi / 2 if alpha_h == 0 else math.atan(1 / alpha_h)
    return math.sqrt(theta * C_LIGHT / (math.pi * wavelength**2 * d_total * PS_PER_NM_TO_SI))


def core_ripple_db(params: McfParams, core_idx: int, f) -> np.ndarray:
    """Per-core two-term cosine ripple (dB), even in frequency.

    The peak excursion over [0, ripple_span] is between half and all of
    ``core_ripple_db``; beyond the span the ripple is held at its edge value.
    """
    f = np.minimum(np.abs(np.asarray(f, dtype=float)), params.ripple_span)
    if params.core_ripple_db == 0:
        return np.zeros_like(f)
    rng = np.random.default_rng([params.variation_seed, core_idx])
    amps = rng.uniform(-1, 1, 2)
    phases = rng.uniform(0, 2 * np.pi, 2)
    peak = params.core_ripple_db * rng.uniform(0.5, 1.0)

    def shape(x):
        u = np.pi * x / params.ripple_span
        return amps[0] * np.cos(u + phases[0]) + amps[1] * np.cos(2 * u + phases[1])

    norm = np.max(np.abs(shape(np.linspace(0, params.ripple_span, 1001))))
    return peak * shape(f) / norm


def propagate_core(field: OpticalField, params: McfParams, core_idx: int) -> OpticalField:
    """Fan-in, core ripple, net dispersion, fiber attenuation, fan-out."""
    if not 0 <= core_idx < params.n_cores:
        raise IndexError(f"core index {core_idx} outside [0, {params.n_cores})")
    fan_in = params.fan_modules - params.fan_modules // 2
    fan_out = params.fan_modules // 2
    x = field.samples * 10 ** (-fan_in * params.fanio_loss / 20)
    out = field.with_samples(x)
    if params.core_ripple_db:
        out = apply_gain(out, lambda f: 10 ** (core_ripple_db(params, core_idx, f) / 20))
    out = disperse(out, params.d_total)
    span_loss = params.attenuation * params.length / 1e3 + params.dcm_loss
    return out.with_samples(out.samples * 10 ** (-(span_loss + fan_out * params.fanio_loss) / 20))


def core_adjacency(n_cores: int) -> list[tuple[int, int]]:
    """Adjacent core pairs. Seven cores form a hexagon around core 0;
    other counts are treated as a linear array."""
    if n_cores == 7:
        pairs = [(0, k) for k in range(1, 7)]
        pairs += [(k, k % 6 + 1) for k in range(1, 7)]
        return sorted((min(a, b), max(a, b)) for a, b in pairs)
    return [(k, k + 1) for k in range(n_cores - 1)]


def coupling_power(params: McfParams) -> float:
    """Per-adjacent-pair power coupling ratio (linear)."""
    fiber = 10 ** (params.xt_per_100km / 10) * params.length / 100e3
    return fiber + 10 ** (params.fanio_xt / 10)


def crosstalk_matrix(params: McfParams, seed: int = 0) -> np.ndarray:
    """Unitary lumped coupling matrix exp(-jK) for the adjacent-core pairs.

    ``K`` is Hermitian with ``|K_kj| = sqrt(coupling_power)`` and a random
    phase per pair, so leakage into an adjacent core is ``coupling_power`` to
    first order while total power is conserved exactly.
    """
    n = params.n_cores
    kappa = math.sqrt(coupling_power(params))
    if kappa == 0 or n == 1:
        return np.eye(n, dtype=complex)
    rng = np.random.default_rng([seed, 4507])
    k = np.zeros((n, n), dtype=complex)
    for a, b in core_adjacency(n):
        c = kappa * np.exp(1j * rng.uniform(0, 2 * np.pi))
        k[a, b] = c
        k[b, a] = np.conj(c)
    return scipy.linalg.expm(-1j * k)


def add_crosstalk(fields, params: McfParams, seed: int = 0) -> list[OpticalField]:
    """Mix per-core fields through the lumped coupling matrix."""
    fields = list(fields)
    if len(fields) != params.n_cores:
        raise ValueError(f"expected {params.n_cores} core fields, got {len(fields)}")
    ref = fields[0]
    for fd in fields[1:]:
        if len(fd) != len(ref) or fd.sample_rate != ref.sample_rate or fd.wavelength != ref.wavelength:
            raise GridError("all core fields must share one sample grid and wavelength")
    u = crosstalk_matrix(params, seed)
    if np.array_equal(u, np.eye(params.n_cores)):
        return fields
    mixed = u @ np.vstack([fd.samples for fd in fields])
    return [ref.with_samples(row) for row in mixed]
