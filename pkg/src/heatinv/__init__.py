"""Heat invariants of Laplace type operators by geometric symbol calculus."""
from .expr import Index, RationalSymbol, RewriteError, StructuralError, TensorPolynomial
from .textio import parse, to_json, to_latex, to_text

__all__ = [
    "Index",
    "RationalSymbol",
    "RewriteError",
    "StructuralError",
    "TensorPolynomial",
    "parse",
    "to_json",
    "to_latex",
    "to_text",
]
__version__ = "0.1.0"
