"""MJ frontend: parser, typechecker, normalizer and sequential interpreter."""

from . import ast
from .ast import (
    BOOL,
    INT,
    INT_ARRAY,
    NormalizedProgram,
    Program,
    STR,
    STR_ARRAY,
    Type,
    TypedProgram,
    array_of,
    map_of,
    program_source,
)
from .errors import MJError, MJSyntaxError, MJTrap, MJTypeError
from .interp import interpret
from .normalize import normalize
from .parser import parse
from .typecheck import function_var_types, typecheck

__all__ = [
    "ast",
    "BOOL",
    "INT",
    "INT_ARRAY",
    "MJError",
    "MJSyntaxError",
    "MJTrap",
    "MJTypeError",
    "NormalizedProgram",
    "Program",
    "STR",
    "STR_ARRAY",
    "Type",
    "TypedProgram",
    "array_of",
    "function_var_types",
    "interpret",
    "map_of",
    "normalize",
    "parse",
    "program_source",
    "typecheck",
]


def frontend(text: str) -> NormalizedProgram:
    """parse -> typecheck -> normalize in one call."""
    return normalize(typecheck(parse(text)))
