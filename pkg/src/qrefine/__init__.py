"""qrefine: interactive refinement of quantum programs with projective assertions.

The package is organised bottom-up:

  kernels    dense linear-algebra primitives (numba-jitted with numpy fallback)
  lattice    subspaces of C^d as an orthomodular lattice
  qop        registers, labelled operators, density states
  lang       surface syntax: tokenizer, parsers, pretty-printer
  opeval     evaluation of operator expressions against an environment
  semantics  simulation, weakest liberal preconditions, strongest postconditions
  refine     goals, proof trees, refinement tactics
  engine     command interpreter, script runner, watch mode
  api        HTTP/WebSocket facade for user interfaces
"""

from .lattice import Subspace, Tolerances, DEFAULT_TOL

__all__ = ["Subspace", "Tolerances", "DEFAULT_TOL"]
__version__ = "0.1.0"
