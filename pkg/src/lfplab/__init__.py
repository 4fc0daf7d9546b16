"""lfplab: phase-space laboratory for Lindblad / Fokker-Planck correspondence."""

__version__ = "0.1.0"
