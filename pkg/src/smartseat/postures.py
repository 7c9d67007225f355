"""The fixed posture vocabulary (7 sitting postures + empty seat)."""

from .errors import InvalidLabelError

POSTURES: tuple[str, ...] = (
    "Empty",
    "Upright",
    "Slouching",
    "LeanLeft",
    "LeanRight",
    "LeftLegCrossed",
    "RightLegCrossed",
    "LeanBack",
)

EMPTY = "Empty"

CLASS_INDEX: dict[str, int] = {name: i for i, name in enumerate(POSTURES)}

NON_EMPTY_POSTURES: tuple[str, ...] = POSTURES[1:]


def class_index(label: str, class_names: tuple[str, ...] = POSTURES) -> int:
    """Index of ``label`` in ``class_names``; raises on unknown labels."""
    try:
        return class_names.index(label)
    except ValueError:
        raise InvalidLabelError(
            f"unknown posture label {label!r}; expected one of {list(class_names)}"
        ) from None
