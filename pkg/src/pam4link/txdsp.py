"""Offline transmitter DSP: PRBS-15, Gray PAM-4, raised-cosine shaping,
zero-forcing pre-equalization and the AWG (DAC) model."""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from pam4link.errors import GridError
from pam4link.sigkit import (
    FrequencyResponse,
    Waveform,
    apply_frequency_response,
    apply_gain,
    lowpass_response,
)

PRBS15_PERIOD = 2**15 - 1

# index = 2*msb + lsb; Gray order along the amplitude axis is 00, 01, 11, 10
_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])
_LEVEL_TO_INDEX = {-3: 0, -1: 1, 3: 2, 1: 3}


@dataclass(frozen=True)
class TxConfig:
    """Transmitter settings.

    ``sps`` is the symbol-synchronous rate used for pulse synthesis; the
    shaped waveform is then resampled onto the ``dac_rate`` grid.
    """

    baud: float = 50e9
    rolloff: float = 0.15
    sps: int = 2
    preeq_cutoff: float = 26e9
    preeq_floor_db: float = -35.0
    dac_bits: int = 8
    dac_rate: float = 92e9
    dac_bandwidth: float = 32e9
    drive_vpp: float = 0.700

    def __post_init__(self):
        if not 0 <= self.rolloff <= 1:
            raise ValueError("rolloff must be in [0, 1]")
        if self.baud <= 0 or self.dac_rate <= 0:
            raise ValueError("baud and dac_rate must be positive")
        if self.baud * (1 + self.rolloff) / 2 >= self.dac_rate / 2:
            raise ValueError("shaped signal bandwidth exceeds the DAC Nyquist frequency")
        if self.dac_bits < 1:
            raise ValueError("dac_bits must be >= 1")
        if self.drive_vpp <= 0:
            raise ValueError("drive_vpp must be positive")
        if int(self.sps) != self.sps or self.sps < 2:
            raise ValueError("sps must be an integer >= 2")

    @property
    def full_scale(self) -> float:
        return self.drive_vpp / 2


@functools.lru_cache(maxsize=8)
def _prbs15_period(seed: int) -> np.ndarray:
    out = np.empty(PRBS15_PERIOD, dtype=np.uint8)
    state = seed
    for i in range(PRBS15_PERIOD):
        bit = ((state >> 14) ^ (state >> 13)) & 1
        state = ((state << 1) | bit) & 0x7FFF
        out[i] = bit
    out.setflags(write=False)
    return out


def prbs15(seed: int = 0x7FFF, n: int = PRBS15_PERIOD) -> np.ndarray:
    """Bits of the x^15 + x^14 + 1 Fibonacci LFSR.

    ``seed`` is the initial 15-bit register; each step shifts in
    ``r[14] xor r[13]`` and emits that bit.
    """
    if not 0 < seed < 2**15:
        raise ValueError("PRBS-15 seed must be a nonzero 15-bit value")
    if n < 0:
        raise ValueError("n must be non-negative")
    period = _prbs15_period(int(seed))
    reps = -(-n // PRBS15_PERIOD)
    return np.tile(period, reps)[:n].copy()


def map_pam4(bits) -> np.ndarray:
    """Gray-map bit pairs (MSB first) to levels: 00->-3, 01->-1, 11->+1, 10->+3."""
    b = np.asarray(bits, dtype=np.int64)
    if b.size % 2:
        raise ValueError("PAM-4 mapping needs an even number of bits")
    return _LEVELS[2 * b[0::2] + b[1::2]]


def demap_pam4(levels) -> np.ndarray:
    """Inverse of :func:`map_pam4` for exact levels in {-3, -1, 1, 3}."""
    lv = np.asarray(levels)
    idx = np.full(lv.shape, -1, dtype=np.int64)
    for level, i in _LEVEL_TO_INDEX.items():
        idx[lv == level] = i
    if np.any(idx < 0):
        raise ValueError("levels must be in {-3, -1, 1, 3}")
    bits = np.empty(2 * lv.size, dtype=np.uint8)
    bits[0::2] = idx >> 1
    bits[1::2] = idx & 1
    return bits


def raised_cosine_spectrum(f, baud: float, rolloff: float) -> np.ndarray:
    """Raised-cosine transfer function, unity in the flat band."""
    af = np.abs(np.asarray(f, dtype=float))
    f1 = (1 - rolloff) * baud / 2
    f2 = (1 + rolloff) * baud / 2
    h = np.zeros_like(af)
    h[af <= f1] = 1.0
    if rolloff > 0:
        band = (af > f1) & (af <= f2)
        h[band] = 0.5 * (1 + np.cos(np.pi / (rolloff * baud) * (af[band] - f1)))
    return h


def pulse_shape(symbols, cfg: TxConfig) -> Waveform:
    """Raised-cosine shaping of one period of ``symbols`` at ``cfg.sps``.

    Synthesis is done in the frequency domain on the periodic grid, so the
    output is exactly band-limited to ``(1 + rolloff) * baud / 2`` and exactly
    ISI-free at the symbol centers (sample ``k * sps``).
    """
    if not 0 <= cfg.rolloff <= 1:
        raise ValueError("rolloff must be in [0, 1]")
    a = np.asarray(symbols, dtype=float)
    n, sps = a.size, int(cfg.sps)
    fs = cfg.baud * sps
    spec = np.tile(np.fft.fft(a), sps)
    f = np.fft.fftfreq(n * sps, 1 / fs)
    y = sps * np.fft.ifft(spec * raised_cosine_spectrum(f, cfg.baud, cfg.rolloff)).real
    return Waveform(y, fs)


def design_preequalizer(
    h_e2e: FrequencyResponse,
    cutoff: float = 26e9,
    floor_db: float = -35.0,
    f_max: float = 200e9,
) -> FrequencyResponse:
    """Zero-forcing pre-equalizer for a measured end-to-end response.

    Below ``cutoff`` the gain is ``1/h`` with ``|h|`` clamped from below at
    ``floor_db`` (20*log10 scale) under its maximum, normalized to unit DC
    gain. Above the cutoff the magnitude is held at its cutoff value and the
    phase continues with the slope it had at the cutoff. The grid is extended
    at the input spacing up to ``f_max`` so the result covers fast sample
    grids.
    """
    f = np.asarray(h_e2e.freqs)
    g = np.asarray(h_e2e.gains)
    if f[0] > 0:
        f = np.concatenate([[0.0], f])
        g = np.concatenate([[abs(g[0])], g])
    if not f[0] <= cutoff <= f[-1]:
        raise GridError("cutoff must lie inside the channel response grid")
    inband = f <= cutoff
    mag = np.abs(g)
    peak = mag[inband].max()
    if peak == 0:
        raise ValueError("channel response is identically zero in band")
    floor = peak * 10 ** (floor_db / 20)
    clamped = np.maximum(mag, floor) * np.exp(1j * np.angle(g))
    inv = 1 / clamped[inband]
    inv /= abs(inv[0])
    f_in = f[inband]

    phase = np.unwrap(np.angle(inv))
    k_fit = f_in >= f_in[-1] - 1e9
    if k_fit.sum() >= 2:
        slope = np.polyfit(f_in[k_fit], phase[k_fit], 1)[0]
    else:
        slope = (phase[-1] - phase[-2]) / (f_in[-1] - f_in[-2])
    df = np.median(np.diff(f))
    f_hi = np.arange(f_in[-1] + df, max(f_max, f[-1]) + df / 2, df)
    g_hi = abs(inv[-1]) * np.exp(1j * (phase[-1] + slope * (f_hi - f_in[-1])))
    return FrequencyResponse(np.concatenate([f_in, f_hi]), np.concatenate([inv, g_hi]))


def quantize(x, bits: int, full_scale: float) -> np.ndarray:
    """Symmetric mid-rise uniform quantizer with ``2**bits`` levels on [-FS, FS].

    The outermost levels sit exactly at +/-FS, and ``q(-x) == -q(x)``. There
    is no zero level; a zero input lands on the half step carrying its sign.
    """
    x = np.asarray(x, dtype=float)
    half = 2 ** (bits - 1)
    step = full_scale / (half - 0.5)
    k = np.minimum(np.floor(np.abs(x) / step), half - 1)
    return np.copysign((k + 0.5) * step, x)


def dac_response(freqs, cfg: TxConfig) -> np.ndarray:
    return lowpass_response(freqs, cfg.dac_bandwidth, "bessel", 4)


def apply_preeq_and_dac(
    x: Waveform,
    preeq: FrequencyResponse | None,
    cfg: TxConfig,
    bandlimit: bool = True,
) -> Waveform:
    """Pre-equalize, normalize to DAC full scale, quantize and band-limit.

    ``x`` must already sit on the DAC grid. The peak of the equalized signal is
    scaled to ``drive_vpp / 2`` before quantization; with ``bandlimit`` the
    AWG's analog low-pass is applied to the quantized samples.
    """
    if abs(x.sample_rate / cfg.dac_rate - 1) > 1e-3:
        raise GridError(
            f"waveform at {x.sample_rate:.6g} Sa/s is not on the DAC grid ({cfg.dac_rate:.6g})"
        )
    y = x if preeq is None else apply_frequency_response(x, preeq)
    peak = np.max(np.abs(y.samples))
    if peak == 0:
        return y.with_samples(np.zeros(len(y)))
    codes = quantize(y.samples * (cfg.full_scale / peak), cfg.dac_bits, cfg.full_scale)
    out = y.with_samples(codes)
    if bandlimit:
        out = apply_gain(out, lambda f: dac_response(f, cfg))
    return out


def to_csv(w: Waveform, path) -> None:
    """Single-column export with a ``# sample_rate=<Hz>`` header line."""
    with open(path, "w") as fh:
        fh.write(f"# sample_rate={w.sample_rate!r}\n")
        np.savetxt(fh, w.samples, fmt="%.17g")


def from_csv(path) -> Waveform:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# sample_rate="):
            raise ValueError("missing sample_rate header")
        rate = float(header.split("=", 1)[1])
        data = np.loadtxt(fh, ndmin=1)
    return Waveform(data, rate)
