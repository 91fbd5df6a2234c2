"""PAM-4 IM/DD link simulator for directly modulated VCSELs over multicore fiber."""

from pam4link.sigkit import FrequencyResponse, OpticalField, Waveform

__version__ = "0.1.0"

__all__ = ["FrequencyResponse", "OpticalField", "Waveform", "__version__"]
