"""Numerics for the dilute Bose gas on three-dimensional Bravais lattices.

Modules:

* :mod:`latbose.lattice` - lattice models, dispersion, finite boxes, momentum grids
* :mod:`latbose.quadrature` - Brillouin-zone quadrature
* :mod:`latbose.scattering` - lattice scattering length and scattering solution
* :mod:`latbose.bogoliubov` - trial-state energies (finite box and thermodynamic)
* :mod:`latbose.spectra` - periodic and Neumann Laplacians and their spectra
* :mod:`latbose.lower_bound` - finite-volume lower-bound certificate
* :mod:`latbose.ed` - exact diagonalization of the Bose-Hubbard Hamiltonian
* :mod:`latbose.cli` - command-line interface
"""

__version__ = "0.1.0"

from .lattice import LatticeModel, build_lattice, load_config, simple_cubic  # noqa: E402,F401
