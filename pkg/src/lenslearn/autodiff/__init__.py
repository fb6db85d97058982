from .expr import (Const, Copy, Delete, Id, MorphExpr, Par, Perm, Prim, Proj, Seq, Sum,
                   copy_n, par, prim, seq, swap)
from .functor import differentiate, evaluate
from .primitives import ACTIVATIONS, CATALOGUE, PrimSpec, mutated
from .sexpr import parse, to_text

__all__ = [
    "MorphExpr", "Prim", "Seq", "Par", "Id", "Copy", "Sum", "Delete", "Const", "Proj", "Perm",
    "seq", "par", "prim", "copy_n", "swap", "differentiate", "evaluate", "parse", "to_text",
    "PrimSpec", "CATALOGUE", "ACTIVATIONS", "mutated",
]
