"""Directed polymers and last-passage percolation on Z^d_+: exact finite-lattice
free energies, exact Gibbs path sampling, and Monte Carlo estimation of the
fluctuation, transversal and curvature exponents."""

__version__ = "0.1.0"
