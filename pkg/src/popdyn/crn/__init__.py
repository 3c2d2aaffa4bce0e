"""Chemical reaction networks: expressions, model files and built-in models."""
from .expr import PropensityDomainError
from .library import BUILTIN_NAMES, ModelLibraryEntry, builtin_model
from .network import (
    Constraint, DuplicateNameError, InitRange, MalformedRangeError, ModelError,
    ModelSyntaxError, Parameter, Reaction, ReactionNetwork, SimGrid,
    UndeclaredIdentifierError,
)
from .parse import format_network, parse_network


def eval_propensity(net: ReactionNetwork, reaction, state, theta=()) -> float:
    """Rate of one reaction (given by index or name) at ``state``.

    ``theta`` holds the varying parameters only; fixed values come from ``net``.
    """
    if isinstance(reaction, str):
        reaction = [r.name for r in net.reactions].index(reaction)
    elif isinstance(reaction, Reaction):
        reaction = net.reactions.index(reaction)
    from .expr import check_rate

    rate = net.propensities(state, theta)[reaction]
    return check_rate(rate, net.reactions[reaction].name)


__all__ = [
    "BUILTIN_NAMES", "Constraint", "DuplicateNameError", "InitRange", "MalformedRangeError",
    "ModelError", "ModelLibraryEntry", "ModelSyntaxError", "Parameter",
    "PropensityDomainError", "Reaction", "ReactionNetwork", "SimGrid",
    "UndeclaredIdentifierError", "builtin_model", "eval_propensity", "format_network",
    "parse_network",
]
