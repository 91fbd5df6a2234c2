"""Experiment orchestration: scenarios, link characterization, BER runs,
sweeps over received power and equalizer taps, and the notch report."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from pam4link import __version__, rxdsp, rxfe, txdsp, vcsel
from pam4link.errors import ClippingError, LinkError, SyncError
from pam4link.fiberlink import McfParams, add_crosstalk, predict_notch, propagate_core
from pam4link.rxdsp import BerRecord, EqConfig, EyeDiagram
from pam4link.rxfe import RxParams
from pam4link.sigkit import (
    FrequencyResponse,
    OpticalField,
    Waveform,
    apply_frequency_response,
    apply_gain,
    first_null,
    resample_to_length,
)
from pam4link.txdsp import PRBS15_PERIOD, TxConfig
from pam4link.vcsel import VcselParams

SIM_SPS = 4
CHAR_PERIOD = 8e-9  # 125 MHz bins; probe tones on odd bins -> 250 MHz grid
CHAR_MAX_FREQ = 40e9
CORE_SHIFT = PRBS15_PERIOD // 7  # per-core cyclic shift of the pattern


@dataclass(frozen=True)
class Scenario:
    """Declarative experiment description. ``mcf = None`` is back-to-back."""

    name: str
    baud: float
    tx: TxConfig = field(default_factory=TxConfig)
    vcsel: VcselParams = field(default_factory=VcselParams)
    mcf: McfParams | None = None
    rx: RxParams = field(default_factory=RxParams)
    eq: EqConfig = field(default_factory=EqConfig)
    rop_sweep: tuple = (7.0,)
    cores: tuple = (0,)
    n_symbols: int = 2 * PRBS15_PERIOD
    master_seed: int = 1
    preeq: bool = True
    crosstalk: bool = True
    min_errors: int = 10
    max_bits: int = 1_000_000

    def __post_init__(self):
        if self.tx.baud != self.baud:
            object.__setattr__(self, "tx", replace(self.tx, baud=self.baud))
        object.__setattr__(self, "rop_sweep", tuple(float(r) for r in self.rop_sweep))
        object.__setattr__(self, "cores", tuple(int(c) for c in self.cores))
        if not self.rop_sweep:
            raise ValueError("rop_sweep must not be empty")
        if self.n_symbols < PRBS15_PERIOD or self.n_symbols % PRBS15_PERIOD:
            raise ValueError(f"n_symbols must be a positive multiple of {PRBS15_PERIOD}")
        n_cores = 1 if self.mcf is None else self.mcf.n_cores
        if not self.cores or any(not 0 <= c < n_cores for c in self.cores):
            raise ValueError(f"cores must be indices below {n_cores}")
        if self.eq.train_len > self.n_symbols:
            raise ValueError("training sequence longer than the capture")

    @property
    def n_cores(self) -> int:
        return 1 if self.mcf is None else self.mcf.n_cores

    @property
    def sim_rate(self) -> float:
        return SIM_SPS * self.baud

    @property
    def aggregate_gbps(self) -> float:
        return len(self.cores) * self.baud * 2 / 1e9


# -- scenario files ------------------------------------------------------------

_SECTIONS = {"tx": TxConfig, "vcsel": VcselParams, "mcf": McfParams, "rx": RxParams, "eq": EqConfig}


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def scenario_to_dict(s: Scenario) -> dict:
    out = {}
    for f in dataclasses.fields(s):
        v = getattr(s, f.name)
        if dataclasses.is_dataclass(v):
            v = {k.name: _plain(getattr(v, k.name)) for k in dataclasses.fields(v)}
        out[f.name] = _plain(v)
    return out


def scenario_from_dict(d: dict) -> Scenario:
    d = dict(d)
    unknown = set(d) - {f.name for f in dataclasses.fields(Scenario)}
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    for key, cls in _SECTIONS.items():
        if d.get(key) is not None:
            d[key] = cls(**d[key])
    for key in ("rop_sweep", "cores"):
        if key in d:
            d[key] = tuple(d[key])
    return Scenario(**d)


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def save_scenario(s: Scenario, path, header: str = "") -> None:
    text = dump_scenario(s)
    if header:
        text = "".join(f"# {line}\n" for line in header.splitlines()) + text
    Path(path).write_text(text)


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("pam4link.presets").iterdir() if p.name.endswith(".yaml"))


def load_scenario(path_or_name) -> Scenario:
    """Load a scenario file, or a bundled preset by name."""
    p = Path(path_or_name)
    if p.suffix in (".yaml", ".yml") or p.exists():
        text = p.read_text()
    else:
        res = resources.files("pam4link.presets") / f"{path_or_name}.yaml"
        if not res.is_file():
            raise FileNotFoundError(f"no scenario file or preset named {path_or_name!r}")
        text = res.read_text()
    return scenario_from_dict(yaml.safe_load(text))


def scenario_hash(s: Scenario) -> str:
    return hashlib.sha256(dump_scenario(s).encode()).hexdigest()[:16]


def manifest(s: Scenario, command: str = "") -> str:
    import numba
    import scipy

    lines = [
        f"scenario: {s.name}",
        f"scenario_sha256: {scenario_hash(s)}",
        f"master_seed: {s.master_seed}",
        f"n_symbols: {s.n_symbols}",
        f"command: {command}",
        f"pam4link: {__version__}",
        f"python: {platform.python_version()}",
        f"numpy: {np.__version__}",
        f"scipy: {scipy.__version__}",
        f"numba: {numba.__version__}",
    ]
    return "\n".join(lines) + "\n"


def _seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


# -- signal chain ----------------------------------------------------------------


def reference_symbols() -> np.ndarray:
    """One period (32767 symbols) of the PRBS-15 PAM-4 pattern."""
    return txdsp.map_pam4(txdsp.prbs15(n=2 * PRBS15_PERIOD))


def core_symbols(s: Scenario, core: int) -> np.ndarray:
    ref = reference_symbols()
    return np.roll(np.tile(ref, s.n_symbols // PRBS15_PERIOD), core * CORE_SHIFT)


def _optical_channel(s: Scenario, drives: dict[int, Waveform]) -> dict[int, OpticalField]:
    """VCSELs, fiber and crosstalk for every core (noise-free)."""
    fields = {}
    for core, d in drives.items():
        with np.errstate(all="ignore"):
            fields[core] = vcsel.modulate(s.vcsel, d, remove_offset=True)
    if s.mcf is None:
        return fields
    out = {k: propagate_core(f, s.mcf, k) for k, f in fields.items()}
    if s.crosstalk and len(out) == s.mcf.n_cores:
        mixed = add_crosstalk([out[k] for k in range(s.mcf.n_cores)], s.mcf, s.master_seed)
        out = dict(enumerate(mixed))
    return out


def _all_cores(s: Scenario) -> list[int]:
    # crosstalk needs every core lit, as in the experiment
    if s.mcf is not None and s.crosstalk:
        return list(range(s.mcf.n_cores))
    return list(s.cores)


def _receive(fld: OpticalField, s: Scenario, rop: float, seed: int, noise: bool = True,
             quantize: bool = True) -> Waveform:
    rx = s.rx if noise else s.rx.noiseless
    amp = rxfe.edfa_agc(fld, rx, _seed(seed, 1))
    att = rxfe.voa_set_rop(amp, min(rop, rxfe.power_dbm(amp)))
    i = rxfe.photodetect(att, rx, _seed(seed, 2))
    if quantize:
        return rxfe.adc_capture(i, rx)
    return apply_gain(rxfe.resample(i, rx.adc_rate), lambda f: rxfe.adc_response(rx, f))


def characterize_link(
    s: Scenario,
    noise: bool = False,
    averages: int = 1,
    planted: FrequencyResponse | None = None,
    relative_rms: float = 0.02,
) -> dict[int, FrequencyResponse]:
    """Electrical-to-electrical response of every core with a multitone probe.

    The probe (odd multiples of 125 MHz up to 40 GHz, 250 MHz apart) is sent
    through the DAC band-limit, VCSEL, fiber, receiver and ADC; the response
    is the complex ratio of captured to sent tones, averaged coherently over
    ``averages`` captures. ``planted`` inserts an extra electrical response
    right after the DAC, for self-checks.
    """
    n_dac = int(round(CHAR_PERIOD * s.tx.dac_rate))
    dac_rate = n_dac / CHAR_PERIOD
    rms_v = relative_rms * (s.vcsel.bias - s.vcsel.i_th) * s.vcsel.r_drive
    probe, bins = vcsel.multitone_probe(2 / CHAR_PERIOD, CHAR_MAX_FREQ, dac_rate, rms_v)
    if np.max(np.abs(probe.samples)) > s.tx.full_scale:
        raise ClippingError("characterization probe exceeds the DAC full scale")
    drive = apply_gain(probe, lambda f: txdsp.dac_response(f, s.tx))
    if planted is not None:
        drive = apply_frequency_response(drive, planted)
    n_sim = int(round(CHAR_PERIOD * s.sim_rate))
    drive = resample_to_length(drive, n_sim)
    cores = _all_cores(s)
    p_probe = vcsel.intensity(s.vcsel, drive)
    if np.any(p_probe <= 0):
        raise ClippingError("characterization probe drives the VCSEL below threshold")
    fields = _optical_channel(s, {k: drive for k in cores})
    sent = np.fft.rfft(probe.samples)[bins] / len(probe)
    rop = max(s.rop_sweep)
    out = {}
    for k in s.cores:
        acc = 0
        for m in range(averages):
            cap = _receive(fields[k], s, rop, _seed(s.master_seed, 77, k, m), noise=noise, quantize=noise)
            acc = acc + np.fft.rfft(cap.samples)[bins] / len(cap)
        out[k] = FrequencyResponse(bins / CHAR_PERIOD, acc / averages / sent)
    return out


def preequalizers(s: Scenario, responses=None) -> dict[int, FrequencyResponse | None]:
    if not s.preeq:
        return {k: None for k in _all_cores(s)}
    if responses is None or any(k not in responses for k in _all_cores(s)):
        responses = characterize_link(replace(s, cores=tuple(_all_cores(s))))
    return {
        k: txdsp.design_preequalizer(responses[k], s.tx.preeq_cutoff, s.tx.preeq_floor_db)
        for k in _all_cores(s)
    }


def transmit(s: Scenario, responses=None) -> dict[int, OpticalField]:
    """Noise-free optical fields at the receiver input, per core."""
    pre = preequalizers(s, responses)
    n_dac = int(round(s.n_symbols * s.tx.dac_rate / s.baud))
    n_sim = s.n_symbols * SIM_SPS
    drives = {}
    for k in _all_cores(s):
        shaped = txdsp.pulse_shape(core_symbols(s, k), s.tx)
        on_dac = resample_to_length(shaped, n_dac)
        drives[k] = resample_to_length(txdsp.apply_preeq_and_dac(on_dac, pre[k], s.tx), n_sim)
    return _optical_channel(s, drives)


def rx_bandwidth(s: Scenario) -> float:
    """Receive low-pass edge: the shaped signal band."""
    return s.baud * (1 + s.tx.rolloff) / 2


def detect(capture: Waveform, s: Scenario, core: int, eq: EqConfig):
    """Synchronize, equalize, decide and count one capture.

    Returns ``(errors, bits, eq_result)``.
    """
    ref = reference_symbols()
    aligned, _ = rxdsp.synchronize(capture, ref, s.baud, sps=eq.sps, bandwidth=rx_bandwidth(s))
    ref_full = np.tile(ref, s.n_symbols // PRBS15_PERIOD)
    res = rxdsp.equalize_detailed(aligned, ref_full, eq)
    est = rxdsp.normalize_affine(res.estimates, ref_full, eq.train_len)
    bits = rxdsp.decide_and_demap(est)
    errors, count, _ = rxdsp.count_ber(bits, txdsp.prbs15())
    return errors, count, res


def _leg(args):
    s, fld, core, rop, eqs, noise = args
    results = {eq: [0, 0] for eq in eqs}
    note = ""
    rep = 0
    while True:
        cap = _receive(fld, s, rop, _seed(s.master_seed, core, rep), noise=noise)
        for eq in eqs:
            try:
                e, n, _ = detect(cap, s, core, eq)
            except SyncError as exc:
                note = f"sync failure: {exc}"
                return {q: (0, 0) for q in eqs}, note
            results[eq][0] += e
            results[eq][1] += n
        rep += 1
        done = all(e >= s.min_errors or n >= s.max_bits for e, n in results.values())
        if done or not noise:
            break
    return {q: tuple(v) for q, v in results.items()}, note


@dataclass
class RunResult:
    scenario: Scenario
    records: list[BerRecord]
    eyes: dict[int, EyeDiagram]
    responses: dict[int, FrequencyResponse]

    @property
    def aggregate_gbps(self) -> float:
        return self.scenario.aggregate_gbps

    def summary(self) -> str:
        lines = [f"{self.scenario.name}: aggregate {self.aggregate_gbps:.0f} Gb/s "
                 f"({len(self.scenario.cores)} x {self.scenario.baud / 1e9:g} GBd PAM-4)"]
        for r in self.records:
            flag = "pass" if r.fec_7pct_pass else "fail"
            lines.append(f"  core {r.core_idx} RoP {r.rop_dbm:+.1f} dBm {r.eq.label}: "
                         f"BER {r.ber:.3e} ({r.bit_errors}/{r.bits_compared}) HD-FEC {flag} {r.note}".rstrip())
        return "\n".join(lines)


def run_legs(s: Scenario, eqs, fields=None, rops=None, noise: bool = True, workers: int = 1):
    """BER for every core x RoP x equalizer config.

    The same noise realizations are reused across RoP values and equalizer
    configs (common random numbers), so comparisons are paired.
    """
    fields = transmit(s) if fields is None else fields
    rops = s.rop_sweep if rops is None else rops
    jobs = [(s, fields[k], k, r, tuple(eqs), noise) for k in s.cores for r in rops]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outs = list(pool.map(_leg, jobs))
    else:
        outs = [_leg(j) for j in jobs]
    records = []
    for (_, _, k, r, _, _), (res, note) in zip(jobs, outs):
        for eq in eqs:
            e, n = res[eq]
            records.append(BerRecord(k, r, s.baud, eq, n, e, note=note))
    return records


def equalized_eye(capture: Waveform, s: Scenario, eq: EqConfig, span: int = 2, bins: int = 128) -> EyeDiagram:
    """Eye of the equalized waveform at 8 samples/symbol.

    The trained FFE runs as a fractionally spaced filter over the oversampled
    capture and the DFE correction is held over each symbol interval.
    """
    ref = reference_symbols()
    ref_full = np.tile(ref, s.n_symbols // PRBS15_PERIOD)
    aligned_eq, _ = rxdsp.synchronize(capture, ref, s.baud, sps=eq.sps, bandwidth=rx_bandwidth(s))
    res = rxdsp.equalize_detailed(aligned_eq, ref_full, eq)
    fine, _ = rxdsp.synchronize(capture, ref, s.baud, sps=8, bandwidth=rx_bandwidth(s))
    xn = (fine - res.offset) / res.scale
    y = np.zeros_like(xn)
    center = res.ff.size // 2
    step = (1 if eq.ff_spacing == "half-symbol" else eq.sps) * 8 // eq.sps
    for j, w in enumerate(res.ff):
        y += w * np.roll(xn, -(center - j) * step)
    if res.fb.size:
        d = rxdsp.decide(res.estimates)
        fb = np.zeros_like(res.estimates)
        for m, b in enumerate(res.fb):
            fb += b * np.roll(d, m + 1)
        y -= np.roll(np.repeat(fb, 8), -4)
    a, c = np.polyfit(ref_full, y[::8], 1)
    y = (y - c) / a
    return rxdsp.eye_diagram(Waveform(np.roll(y, 4), 8 * s.baud), s.baud, span, bins, amp_range=(-5, 5))


def eye_at(s: Scenario, core: int, rop: float, fields=None, span: int = 2, bins: int = 128) -> EyeDiagram:
    """Equalized eye of one core at one received power."""
    if core not in _all_cores(s):
        raise ValueError(f"core {core} is not part of scenario {s.name!r}")
    fields = transmit(s) if fields is None else fields
    cap = _receive(fields[core], s, rop, _seed(s.master_seed, core, 0))
    return equalized_eye(cap, s, s.eq, span, bins)


def run_scenario(s: Scenario, workers: int = 1, eye: bool = True) -> RunResult:
    """Characterize, pre-equalize, transmit and measure BER for every leg."""
    responses = characterize_link(replace(s, cores=tuple(_all_cores(s)))) if s.preeq else {}
    fields = transmit(s, responses)
    records = run_legs(s, [s.eq], fields, workers=workers)
    eyes = {}
    if eye:
        rop = max(s.rop_sweep)
        for k in s.cores:
            cap = _receive(fields[k], s, rop, _seed(s.master_seed, k, 0))
            try:
                eyes[k] = equalized_eye(cap, s, s.eq)
            except LinkError:
                pass
    return RunResult(s, records, eyes, {k: responses[k] for k in s.cores if k in responses})


# -- sweeps ------------------------------------------------------------------------


TAP_COMBOS = ("FF", "FF+FB", "halfFF+FB")


def tap_config(combo: str, total: int, base: EqConfig) -> EqConfig:
    """Equalizer for ``total`` taps: FF-only, or an FF/FB split rounding FF up."""
    if total == 0:
        return replace(base, ff_taps=0, fb_taps=0, ff_spacing="symbol")
    if combo == "FF":
        return replace(base, ff_taps=total, fb_taps=0, ff_spacing="symbol")
    ff, fb = -(-total // 2), total // 2
    spacing = "half-symbol" if combo == "halfFF+FB" else "symbol"
    if combo not in TAP_COMBOS:
        raise ValueError(f"unknown tap combo {combo!r}")
    return replace(base, ff_taps=ff, fb_taps=fb, ff_spacing=spacing)


def sweep_taps(s: Scenario, totals=range(0, 22), combos=TAP_COMBOS, rop: float = 7.0,
               core: int | None = None, seeds: int = 1, fields=None) -> list[dict]:
    """Mean BER per (combo, total taps) with paired noise across configs."""
    core = s.cores[0] if core is None else core
    s1 = replace(s, cores=(core,))
    fields = transmit(s1) if fields is None else fields
    cfgs = {(c, t): tap_config(c, t, s.eq) for c in combos for t in totals}
    uniq = list(dict.fromkeys(cfgs.values()))
    per_seed = []
    for m in range(seeds):
        sm = replace(s1, master_seed=s.master_seed + m)
        recs = run_legs(sm, uniq, fields, rops=(rop,))
        per_seed.append({r.eq: r for r in recs})
    rows = []
    for (c, t), cfg in cfgs.items():
        bers = [d[cfg].ber for d in per_seed]
        rows.append({"combo": c, "taps": t, "ff_taps": cfg.ff_taps, "fb_taps": cfg.fb_taps,
                     "spacing": cfg.ff_spacing, "ber": float(np.mean(bers)),
                     "errors": int(sum(d[cfg].bit_errors for d in per_seed)),
                     "bits": int(sum(d[cfg].bits_compared for d in per_seed))})
    return rows


def fec_crossing(rops, bers, threshold: float, floor: float = 1e-12) -> float | None:
    """RoP where BER first falls to ``threshold``, linear in log10(BER)."""
    r = np.asarray(rops, dtype=float)
    b = np.log10(np.maximum(np.asarray(bers, dtype=float), floor))
    order = np.argsort(r)
    r, b = r[order], b[order]
    t = math.log10(threshold)
    if b[0] <= t:
        return float(r[0]) if b[0] == t else None
    for i in range(1, r.size):
        if b[i] <= t < b[i - 1]:
            return float(r[i - 1] + (t - b[i - 1]) * (r[i] - r[i - 1]) / (b[i] - b[i - 1]))
    return None


@dataclass
class RopSweep:
    records: list[BerRecord]
    crossings: dict[int, dict[str, float | None]]


def sweep_rop(s: Scenario, seeds: int = 1, fields=None, workers: int = 1) -> RopSweep:
    """BER versus received power per core, with FEC crossing estimates."""
    if len(s.rop_sweep) < 3:
        raise ValueError("a power sweep needs at least three points")
    fields = transmit(s) if fields is None else fields
    records = []
    for m in range(seeds):
        records += run_legs(replace(s, master_seed=s.master_seed + m), [s.eq], fields, workers=workers)
    crossings = {}
    for k in s.cores:
        mean = [np.mean([r.ber for r in records if r.core_idx == k and r.rop_dbm == rop]) for rop in s.rop_sweep]
        bits = sum(r.bits_compared for r in records if r.core_idx == k) / len(s.rop_sweep)
        floor = 0.5 / max(bits, 1)
        crossings[k] = {
            "7pct": fec_crossing(s.rop_sweep, mean, rxdsp.FEC_7PCT, floor),
            "kp4": fec_crossing(s.rop_sweep, mean, rxdsp.FEC_KP4, floor),
        }
    return RopSweep(records, crossings)


def calibrate_noise(s: Scenario, target_rop: float = 0.0, threshold: float = rxdsp.FEC_7PCT,
                    psd_range=(1e-24, 1e-19), iterations: int = 18, seeds: int = 1) -> float:
    """Thermal noise density placing the BER at ``target_rop`` on ``threshold``.

    Bisection in log(psd) with a fixed set of noise realizations.
    """
    fields = transmit(s)
    core = s.cores[0]

    def ber(psd):
        sp = replace(s, rx=replace(s.rx, thermal_noise_psd=psd), cores=(core,), max_bits=0)
        total_e = total_n = 0
        for m in range(seeds):
            res, _ = _leg((replace(sp, master_seed=s.master_seed + m), fields[core], core, target_rop, (s.eq,), True))
            e, n = res[s.eq]
            total_e += e
            total_n += n
        return total_e / total_n

    lo, hi = math.log(psd_range[0]), math.log(psd_range[1])
    if ber(math.exp(lo)) > threshold or ber(math.exp(hi)) < threshold:
        raise LinkError("threshold not bracketed by the noise density range")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ber(math.exp(mid)) > threshold:
            hi = mid
        else:
            lo = mid
    return math.exp(0.5 * (lo + hi))


# -- notch report --------------------------------------------------------------------


def _with_dispersion(s: Scenario, d_total: float) -> Scenario:
    mcf = s.mcf or McfParams()
    if d_total == 0:
        return replace(s, mcf=None, cores=(0,), preeq=False)
    length = d_total / mcf.dispersion * 1e3
    return replace(s, mcf=replace(mcf, length=length, dcm_dispersion=0.0, dcm_loss=0.0,
                                  core_ripple_db=0.0), cores=(0,), preeq=False, crosstalk=False)


def notch_report(alpha_h: float, d_totals, wavelength: float = 1550e-9, base: Scenario | None = None,
                 simulate: bool = True, kappa: float | None = None) -> list[dict]:
    """Closed-form and simulated first nulls for each dispersion value.

    Simulated nulls come from :func:`characterize_link` on an uncompensated
    fiber of matching length, normalized to the back-to-back response; the
    depth is read on that normalized response. ``kappa = None`` keeps the
    base scenario's adiabatic chirp; the closed form ignores it.
    """
    base = base or load_scenario("mcf1km_50g")
    kappa = base.vcsel.kappa if kappa is None else kappa
    base = replace(base, vcsel=replace(base.vcsel, alpha_h=alpha_h, kappa=kappa, wavelength=wavelength))
    b2b = characterize_link(_with_dispersion(base, 0.0))[0] if simulate else None
    rows = []
    for d in d_totals:
        row = {"alpha_h": alpha_h, "d_total_ps_nm": d, "predicted_hz": None,
               "simulated_hz": None, "depth_db": None, "delta_hz": None, "note": ""}
        if d > 0:
            row["predicted_hz"] = predict_notch(alpha_h, d, wavelength)
        if simulate:
            h = characterize_link(_with_dispersion(base, d))[0] if d > 0 else b2b
            ratio = FrequencyResponse(h.freqs, h.gains / b2b.gains)
            null = first_null(ratio, f_max=CHAR_MAX_FREQ, min_prominence_db=3.0)
            if null is None:
                row["note"] = f"no null below {CHAR_MAX_FREQ / 1e9:.0f} GHz"
            else:
                row["simulated_hz"], row["depth_db"] = null
                if row["predicted_hz"] is not None:
                    row["delta_hz"] = row["simulated_hz"] - row["predicted_hz"]
        elif d == 0:
            row["note"] = "back-to-back reference"
        rows.append(row)
    return rows


def write_rows(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BerRecord.CSV_FIELDS)
    w.writeheader()
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()
