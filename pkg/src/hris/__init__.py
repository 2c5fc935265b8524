"""Hybrid reconfigurable intelligent surface (HRIS) design and simulation toolkit.

The package is split by concern:

- ``touchstone``  Touchstone v1 / CSV S-parameter I/O
- ``retrieval``   effective-parameter extraction and the forward slab model
- ``geometry``    wavelength rules, unit-cell fit check, panel layout
- ``unitcell``    SP4T load bank, hybrid cell split, shorted-patch circuit
- ``fields``      phase profiles, 2-bit quantization, array factor patterns
- ``sensing``     interleaved sensing arrays and beam-scan DoA estimation
- ``controller``  lookup-table calibration and closed-loop episodes
- ``cli``         batch command line front end

All complex quantities use the exp(-i*omega*t) time convention.
"""

from .errors import HRISError, InvalidInput

C0 = 299792458.0  # speed of light in vacuum, m/s (exact)

__version__ = "0.1.0"

__all__ = ["C0", "HRISError", "InvalidInput", "__version__"]
