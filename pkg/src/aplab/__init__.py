"""Finite truncations of a mixed-norm sequence space, with certified
character splits, sign patterns, and the trace functional separating the
identity from finite-rank operators."""

from .characters import CharacterTable, Group, build_group, character_value, verify_orthogonality
from .discrepancy import (
    CharacterSplit,
    ConstructionData,
    LevelData,
    SignPattern,
    certify_constants,
    search_character_split,
    search_signs,
    split_discrepancy,
)
from .mixed_norm import (
    ExponentSchedule,
    MixedNormVector,
    compactness_sequence,
    flatness_index,
    p_value,
    z_norm,
)

__version__ = "0.1.0"

__all__ = [
    "CharacterTable",
    "CharacterSplit",
    "ConstructionData",
    "ExponentSchedule",
    "Group",
    "LevelData",
    "MixedNormVector",
    "SignPattern",
    "build_group",
    "certify_constants",
    "character_value",
    "compactness_sequence",
    "flatness_index",
    "p_value",
    "search_character_split",
    "search_signs",
    "split_discrepancy",
    "verify_orthogonality",
    "z_norm",
    "__version__",
]
