"""Registry of the built-in (valued) predicates.

Built-in atoms are valued directly from a scene's detections; everything
else is a derived predicate whose arity is fixed by its first occurrence
in a rule program.
"""

from __future__ import annotations

# Attribute families: pred(Object, value) read off a detection's
# per-family probability distribution.
ATTRIBUTE_PREDICATES = ("shape", "color", "size", "class")

# position(A, B, relation) reads "A is <relation> of B" on normalized
# image coordinates (y grows downward, so "above" means smaller cy).
SPATIAL_RELATIONS = ("above", "below", "left", "right")

# at_least(family, value, k): at least k objects carry `value` in `family`.
COUNT_PREDICATE = "at_least"

BUILTIN_ARITY = {
    "shape": 2,
    "color": 2,
    "size": 2,
    "class": 2,
    "position": 3,
    COUNT_PREDICATE: 3,
}


def is_builtin(predicate: str) -> bool:
    return predicate in BUILTIN_ARITY


def object_positions(predicate: str, arity: int) -> tuple[int, ...]:
    """Argument slots that range over detected objects.

    Attribute atoms bind an object in slot 0, position atoms in slots 0-1,
    at_least atoms bind none, and derived predicates bind objects in every
    slot (object ids are the only first-class domain).
    """
    if predicate in ATTRIBUTE_PREDICATES:
        return (0,)
    if predicate == "position":
        return (0, 1)
    if predicate == COUNT_PREDICATE:
        return ()
    return tuple(range(arity))
