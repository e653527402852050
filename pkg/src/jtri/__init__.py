"""jtri: joint unitary triangularization of complex matrix families and
capacity-approaching Gaussian MIMO multicast schemes built on it.

Submodules:
  matcore    dense complex matrix building blocks and JSON interchange
  gtd        single-matrix triangularizations (prescribed diagonal,
             geometric mean, multiplicity tests, block form)
  joint      joint decompositions with a shared right factor, plus the
             closed-form 2x2 existence tests and constructions
  spacetime  time-extension machinery and the nearly-optimal rectangular
             constructions
  multicast  capacity quantities, scheme rates, SIC simulation, worked
             channel families
  cli        command-line front end (console script ``jtri``)
"""

from . import cli, gtd, joint, matcore, multicast, spacetime
from .errors import JtriError

__all__ = ["cli", "gtd", "joint", "matcore", "multicast", "spacetime", "JtriError"]
__version__ = "0.1.0"
