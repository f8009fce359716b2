"""Formal foliation modules: jets, symmetries, leaf holonomy and Cech lifting."""

from .errors import *  # noqa: F401,F403
from .jets import *  # noqa: F401,F403
from .geometry import *  # noqa: F401,F403
from .modules import *  # noqa: F401,F403
from .symmetry import *  # noqa: F401,F403
from .leaves import *  # noqa: F401,F403
from .cech import *  # noqa: F401,F403
from .dsl import parse_definition, parse_expression, format_definition, format_expr, prelude, Namespace  # noqa: F401
from . import catalog, report  # noqa: F401

__version__ = "0.1.0"
