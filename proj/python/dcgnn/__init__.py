"""Differentiable cluster message passing: solvers, graphs, training, diagnostics."""

try:
    from ._dcgnn import *  # noqa: F401,F403  (installed package layout)
    from ._dcgnn import __doc__ as _native_doc  # noqa: F401
except ImportError:  # in-tree builds put the native module on sys.path directly
    from _dcgnn import *  # noqa: F401,F403

__version__ = "0.1.0"
