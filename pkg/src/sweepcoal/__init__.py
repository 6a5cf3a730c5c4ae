"""Recurrent selective sweeps: forward Moran simulation, Lambda/Xi coalescents
and neutrality-statistic numerics."""
from __future__ import annotations

__version__ = "0.1.0"
