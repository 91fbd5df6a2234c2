"""Regenerate the bundled scenario presets."""
from dataclasses import replace
from pathlib import Path

from pam4link.bench import Scenario, save_scenario
from pam4link.fiberlink import McfParams
from pam4link.rxdsp import EqConfig
from pam4link.rxfe import RxParams
from pam4link.vcsel import VcselParams

OUT = Path(__file__).resolve().parents[1] / "src" / "pam4link" / "presets"

# effective chirp fitted so 17.1 ps/nm puts a -25 dB null at 23 GHz
VCSEL = VcselParams(alpha_h=4.353, kappa=1.0036e13)
RX = RxParams(thermal_noise_psd=2.2435e-22)
B2B_ROPS = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
MCF_ROPS = (3.0, 4.0, 5.0, 6.0, 7.0)
ALL = tuple(range(7))

NOTE = (
    "Effective chirp (alpha_h, kappa) and thermal noise density are fitted values;\n"
    "regenerate with tools/make_presets.py."
)


def main():
    OUT.mkdir(exist_ok=True)
    presets = {}
    for gbd, taps in ((50, 3), (56, 3), (64, 3), (70, 5)):
        presets[f"b2b_{gbd}g"] = (
            Scenario(f"b2b_{gbd}g", gbd * 1e9, vcsel=VCSEL, rx=RX, eq=EqConfig(taps, taps),
                     rop_sweep=B2B_ROPS),
            f"Back-to-back, {gbd} GBd PAM-4, {taps}+{taps} taps.",
        )
    for gbd in (50, 56):
        presets[f"mcf1km_{gbd}g"] = (
            Scenario(f"mcf1km_{gbd}g", gbd * 1e9, vcsel=VCSEL, mcf=McfParams(length=1000.0), rx=RX,
                     eq=EqConfig(7, 7), rop_sweep=MCF_ROPS, cores=ALL),
            f"1 km seven-core fiber, {gbd} GBd PAM-4 on every core, 7+7 taps.",
        )
    presets["mcf10km_dcm_50g"] = (
        Scenario("mcf10km_dcm_50g", 50e9, vcsel=VCSEL,
                 mcf=McfParams(length=10000.0, dcm_dispersion=-159.0, dcm_loss=3.0), rx=RX,
                 eq=EqConfig(3, 3), rop_sweep=MCF_ROPS, cores=ALL),
        "10 km seven-core fiber with a -159 ps/nm compensation module, 50 GBd PAM-4, 3+3 taps.",
    )
    for name, (s, header) in presets.items():
        save_scenario(s, OUT / f"{name}.yaml", header + "\n" + NOTE)
        print("wrote", name)


if __name__ == "__main__":
    main()
