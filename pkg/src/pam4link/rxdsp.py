"""Offline receiver DSP: synchronization, LMS FFE/DFE, PAM-4 decisions,
cyclic BER counting, FEC verdicts and eye histograms."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from pam4link.errors import AlignmentError, DivergenceError, SyncError
from pam4link.sigkit import Waveform, apply_gain, resample_to_length
from pam4link.txdsp import demap_pam4

FEC_7PCT = 3.8e-3
FEC_KP4 = 2.4e-4
SYNC_SPS = 8

SPACINGS = ("symbol", "half-symbol")
MODES = ("train-then-freeze", "decision-directed")


@dataclass(frozen=True)
class EqConfig:
    """Adaptive equalizer settings. ``ff_taps = fb_taps = 0`` bypasses it."""

    ff_taps: int = 7
    fb_taps: int = 7
    ff_spacing: str = "symbol"
    step_mu: float = 1e-3
    train_len: int = 4000
    mode: str = "train-then-freeze"

    def __post_init__(self):
        if self.ff_taps < 0 or self.fb_taps < 0:
            raise ValueError("tap counts must be non-negative")
        if self.ff_spacing not in SPACINGS:
            raise ValueError(f"ff_spacing must be one of {SPACINGS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 < self.step_mu < 1:
            raise ValueError("step_mu must be in (0, 1)")
        if self.train_len < 10 * (self.ff_taps + self.fb_taps):
            raise ValueError("train_len must be at least 10x the total tap count")

    @property
    def bypass(self) -> bool:
        return self.ff_taps == 0 and self.fb_taps == 0

    @property
    def sps(self) -> int:
        """Input samples per symbol the equalizer expects."""
        return 2 if self.ff_spacing == "half-symbol" else 1

    @property
    def label(self) -> str:
        if self.bypass:
            return "no-eq"
        tag = "h" if self.ff_spacing == "half-symbol" else ""
        return f"{self.ff_taps}{tag}FF+{self.fb_taps}FB"


@dataclass(frozen=True)
class BerRecord:
    core_idx: int
    rop_dbm: float
    baud: float
    eq: EqConfig
    bits_compared: int
    bit_errors: int
    ber: float = field(init=False)
    fec_7pct_pass: bool = field(init=False)
    fec_kp4_pass: bool = field(init=False)
    note: str = ""

    def __post_init__(self):
        if self.bits_compared <= 0:
            ber = math.nan
        else:
            ber = self.bit_errors / self.bits_compared
        object.__setattr__(self, "ber", ber)
        f7, kp4 = fec_verdict(ber) if math.isfinite(ber) else (False, False)
        object.__setattr__(self, "fec_7pct_pass", f7)
        object.__setattr__(self, "fec_kp4_pass", kp4)

    CSV_FIELDS = ("core", "rop_dbm", "baud", "ff_taps", "fb_taps", "spacing",
                  "bits", "errors", "ber", "fec7", "fecKP4", "note")

    def row(self) -> dict:
        return {
            "core": self.core_idx,
            "rop_dbm": self.rop_dbm,
            "baud": self.baud,
            "ff_taps": self.eq.ff_taps,
            "fb_taps": self.eq.fb_taps,
            "spacing": self.eq.ff_spacing,
            "bits": self.bits_compared,
            "errors": self.bit_errors,
            "ber": self.ber,
            "fec7": int(self.fec_7pct_pass),
            "fecKP4": int(self.fec_kp4_pass),
            "note": self.note,
        }


def write_records(records, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BerRecord.CSV_FIELDS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())


# -- synchronization ---------------------------------------------------------


def _circular_xcorr(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """c[s] = sum_k x[k] * r[k - s] (cyclic)."""
    return np.fft.irfft(np.fft.rfft(x) * np.conj(np.fft.rfft(r)), x.size)


def synchronize(
    samples: Waveform,
    reference,
    baud: float,
    sps: int = 1,
    threshold: float | None = None,
    bandwidth: float | None = None,
):
    """Symbol timing and cyclic frame alignment against a known sequence.

    The capture is resampled to 8 samples per symbol. For each of the 8
    candidate phases the symbol-rate samples are folded onto one reference
    period and cross-correlated with the reference; one common sampling phase
    and offset are chosen at the largest normalized correlation.

    Returns ``(aligned, offset)``. ``aligned`` holds ``sps`` samples per
    symbol, sample ``sps * k`` being the decision instant of ``reference[k]``
    (reference taken cyclically). ``offset`` is the cyclic shift of the
    capture with respect to the reference, in the sense of
    ``np.roll(reference, offset)``.

    ``bandwidth`` applies an ideal receive low-pass before decimation, which
    keeps out-of-band noise and distortion from aliasing onto the symbol
    samples.
    """
    ref = np.asarray(reference, dtype=float)
    period = ref.size
    n_sym = int(round(len(samples) * baud / samples.sample_rate))
    if sps not in (1, 2, 4, 8):
        raise ValueError("sps must be 1, 2, 4 or 8")
    if n_sym < 2 * period:
        raise SyncError(f"capture holds {n_sym} symbols, need at least two reference periods ({2 * period})")
    if n_sym % period:
        raise SyncError("capture must hold a whole number of reference periods")
    y = resample_to_length(samples, SYNC_SPS * n_sym)
    if bandwidth is not None:
        y = apply_gain(y, lambda f: (np.abs(f) <= bandwidth).astype(float))
    y = y.samples.reshape(n_sym, SYNC_SPS)
    r0 = ref - ref.mean()
    r_norm = np.linalg.norm(r0)
    if r_norm == 0:
        raise SyncError("reference has no variation")
    best = (-1.0, 0, 0)
    for ph in range(SYNC_SPS):
        folded = y[:, ph].reshape(-1, period).sum(axis=0)
        folded = folded - folded.mean()
        nrm = np.linalg.norm(folded)
        if nrm == 0:
            continue
        c = _circular_xcorr(folded, r0) / (nrm * r_norm)
        k = int(np.argmax(np.abs(c)))
        if abs(c[k]) > best[0]:
            best = (abs(c[k]), k, ph)
    score, offset, phase = best
    if threshold is None:
        threshold = max(0.2, 6 / math.sqrt(period))
    if score < threshold:
        raise SyncError(f"correlation peak {score:.3f} below significance threshold {threshold:.3f}")
    # sample k*SYNC_SPS + phase carries reference[k - offset]; undo the shift
    flat = np.roll(y.reshape(-1), -phase)
    aligned = flat[:: SYNC_SPS // sps]
    aligned = np.roll(aligned, -offset * sps)
    return aligned, offset


# -- equalization ------------------------------------------------------------


@numba.njit(cache=True)
def _slice(y):
    if y < -2.0:
        return -3.0
    if y < 0.0:
        return -1.0
    if y < 2.0:
        return 1.0
    return 3.0


@numba.njit(cache=True)
def _lms(x, sps, stride, ref, w, b, mu, train_len, adapt_after):
    n_sym = ref.size
    n_x = x.size
    n_ff = w.size
    n_fb = b.size
    center = n_ff // 2
    u = np.empty(n_ff)
    d = ref.copy()  # decision history, seeded with the known sequence
    train_err = np.empty(train_len)
    for k in range(train_len):
        y = 0.0
        for j in range(n_ff):
            u[j] = x[(sps * k + (center - j) * stride) % n_x]
            y += w[j] * u[j]
        if n_ff == 0:
            y = x[(sps * k) % n_x]
        for m in range(n_fb):
            y -= b[m] * ref[(k - 1 - m) % n_sym]
        e = ref[k % n_sym] - y
        train_err[k] = e * e
        for j in range(n_ff):
            w[j] += mu * e * u[j]
        for m in range(n_fb):
            b[m] -= mu * e * ref[(k - 1 - m) % n_sym]
    out = np.empty(n_sym)
    for k in range(n_sym):
        y = 0.0
        for j in range(n_ff):
            u[j] = x[(sps * k + (center - j) * stride) % n_x]
            y += w[j] * u[j]
        if n_ff == 0:
            y = x[sps * k]
        for m in range(n_fb):
            y -= b[m] * d[(k - 1 - m) % n_sym]
        dec = _slice(y)
        d[k] = dec
        out[k] = y
        if adapt_after:
            e = dec - y
            for j in range(n_ff):
                w[j] += mu * e * u[j]
            for m in range(n_fb):
                b[m] -= mu * e * d[(k - 1 - m) % n_sym]
    return out, train_err


@dataclass(frozen=True)
class EqResult:
    estimates: np.ndarray
    ff: np.ndarray
    fb: np.ndarray
    train_mse: float
    scale: float = 1.0
    offset: float = 0.0


def equalize_detailed(x, ref, cfg: EqConfig) -> EqResult:
    """LMS-adapted FFE + DFE. See :func:`equalize`."""
    ref = np.asarray(ref, dtype=float)
    x = np.asarray(x, dtype=float)
    sps = cfg.sps
    if x.size != sps * ref.size:
        raise ValueError(f"expected {sps} samples per reference symbol, got {x.size} for {ref.size}")
    if cfg.train_len > ref.size:
        raise ValueError("train_len exceeds the available reference symbols")
    # affine pre-scaling against the training symbols makes adaptation
    # gain-invariant and leaves a unit-gain channel untouched
    n_tr = max(cfg.train_len, 2)
    a, c = np.polyfit(ref[:n_tr], x[: sps * n_tr : sps], 1)
    if not abs(a) > 1e-6 * (x.std() + 1e-300):
        a = x.std() / ref.std() if x.std() > 0 else 1.0
    xn = (x - c) / a
    if cfg.bypass:
        est = xn[::sps].copy()
        tr = ref[: cfg.train_len]
        return EqResult(est, np.ones(1), np.zeros(0), float(np.mean((est[: cfg.train_len] - tr) ** 2)), a, c)
    w = np.zeros(cfg.ff_taps)
    if cfg.ff_taps:
        w[cfg.ff_taps // 2] = 1.0
    b = np.zeros(cfg.fb_taps)
    stride = 1 if cfg.ff_spacing == "half-symbol" else sps
    out, err = _lms(xn, sps, stride, ref, w, b, cfg.step_mu, cfg.train_len, cfg.mode == "decision-directed")
    tail = max(cfg.train_len // 10, 1)
    head = float(np.mean(err[:tail]))
    end = float(np.mean(err[-tail:]))
    if not np.all(np.isfinite(out)) or (head > 0 and end > 10 * head):
        raise DivergenceError(
            f"LMS diverged with step_mu={cfg.step_mu:g}: training error energy {head:.3g} -> {end:.3g}"
        )
    return EqResult(out, w, b, end, a, c)


def equalize(x, ref, cfg: EqConfig) -> np.ndarray:
    """Adaptive FFE cascaded with a DFE; one estimate per reference symbol.

    ``x`` holds ``cfg.sps`` synchronized samples per symbol (sample
    ``sps * k`` is the decision instant of ``ref[k]``). The FFE is centered
    on the decision instant and initialized to a unit center tap; the DFE
    always runs on symbol-spaced decisions. The first ``train_len``
    symbols train the taps against ``ref``; afterwards the taps are frozen
    or keep adapting on decisions, depending on ``cfg.mode``. Training
    symbols are processed again with the trained taps, so every output comes
    from the same equalizer.
    """
    return equalize_detailed(x, ref, cfg).estimates


def normalize_affine(estimates, ref, n_fit: int | None = None) -> np.ndarray:
    """Least-squares gain and offset mapping ``estimates`` onto the reference grid."""
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(ref, dtype=float)
    n = ref.size if n_fit is None else min(n_fit, ref.size)
    a, c = np.polyfit(ref[:n], est[:n], 1)
    if a == 0:
        raise ValueError("estimates carry no signal")
    return (est - c) / a


def decide(estimates) -> np.ndarray:
    """Nearest PAM-4 level with thresholds at -2, 0 and +2."""
    y = np.asarray(estimates, dtype=float)
    return np.select([y < -2, y < 0, y < 2], [-3.0, -1.0, 1.0], 3.0)


def decide_and_demap(estimates) -> np.ndarray:
    return demap_pam4(decide(estimates))


# -- BER -----------------------------------------------------------------------


def count_ber(bits, reference) -> tuple[int, int, float]:
    """Bit errors after the best cyclic alignment to a periodic reference.

    ``reference`` is one period of the expected bit stream. Every bit shift is
    searched, which also resolves which bit of a symbol is the MSB. Returns
    ``(errors, count, ber)``.
    """
    b = np.asarray(bits, dtype=np.int64)
    ref = np.asarray(reference, dtype=np.int64)
    period = ref.size
    if b.size == 0 or period == 0:
        raise ValueError("empty bit sequence")
    pos = np.arange(b.size) % period
    ones = np.bincount(pos, weights=b, minlength=period)
    total = np.bincount(pos, minlength=period).astype(float)
    # errors(s) = sum_r [ref[r+s]==0]*ones[r] + [ref[r+s]==1]*(total[r]-ones[r])
    rf = np.fft.rfft(ref.astype(float))
    corr = np.fft.irfft(np.conj(np.fft.rfft(total - 2 * ones)) * rf, period)
    errors = np.rint(ones.sum() + corr).astype(np.int64)
    s = int(np.argmin(errors))
    n_err = int(errors[s])
    ber = n_err / b.size
    if ber >= 0.4:
        raise AlignmentError(f"best cyclic alignment still has BER {ber:.3f}")
    return n_err, int(b.size), ber


def fec_verdict(ber: float) -> tuple[bool, bool]:
    """(7 % OH HD-FEC pass, KP4 pass)."""
    if not 0 <= ber <= 1:
        raise ValueError("ber must lie in [0, 1]")
    return ber <= FEC_7PCT, ber <= FEC_KP4


# -- eye diagram ---------------------------------------------------------------


@dataclass(frozen=True)
class EyeDiagram:
    """2-D histogram; ``counts[amplitude_bin, time_bin]``."""

    counts: np.ndarray
    time_edges: np.ndarray
    amp_edges: np.ndarray

    def to_csv(self, path) -> None:
        with Path(path).open("w") as fh:
            fh.write("# rows: amplitude bins (low to high), columns: time bins\n")
            fh.write("# time_edges_s=" + ",".join(f"{t:.6g}" for t in self.time_edges) + "\n")
            fh.write("# amp_edges=" + ",".join(f"{a:.6g}" for a in self.amp_edges) + "\n")
            np.savetxt(fh, self.counts, fmt="%d", delimiter=",")

    def to_pgm(self, path) -> None:
        """Binary graymap, high amplitude at the top, log-compressed."""
        img = np.log1p(self.counts[::-1].astype(float))
        if img.max() > 0:
            img = img / img.max()
        data = (255 * img).astype(np.uint8)
        h, w = data.shape
        with Path(path).open("wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(data.tobytes())


def eye_diagram(x: Waveform, baud: float, span: int = 2, bins: int = 128,
                amp_range: tuple[float, float] | None = None) -> EyeDiagram:
    """Fold ``x`` modulo ``span`` symbol periods into a bins x bins histogram.

    Samples outside ``amp_range`` are counted in the edge rows, so the total
    count always equals the number of samples.
    """
    sps = x.sample_rate / baud
    if sps < 4 - 1e-9:
        raise ValueError(f"eye diagram needs >= 4 samples/symbol, got {sps:.3g}")
    window = span / baud
    t = np.mod(x.times, window)
    lo, hi = (x.samples.min(), x.samples.max()) if amp_range is None else amp_range
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, a_edges, t_edges = np.histogram2d(
        np.clip(x.samples, lo, hi), t, bins=bins, range=[[lo, hi], [0, window]]
    )
    return EyeDiagram(counts.astype(np.int64), t_edges, a_edges)
