"""The fixed 62-symbol character set: digits, uppercase, lowercase.

Every glyph stack, dataset record, and edit request in this package is
indexed against this one ordering, so it must never change between runs.
"""

import string

from .errors import CharsetError

# Ordering is load-bearing: slot i of every glyph stack holds CHARACTERS[i].
CHARACTERS: str = string.digits + string.ascii_uppercase + string.ascii_lowercase

N_CHARS: int = len(CHARACTERS)

_INDEX = {ch: i for i, ch in enumerate(CHARACTERS)}


def char_index(ch: str) -> int:
    """Return the stack slot of ``ch``, in [0, 61].

    Raises CharsetError for anything outside the supported set.
    """
    try:
        return _INDEX[ch]
    except (KeyError, TypeError):
        raise CharsetError(f"character {ch!r} is not in the supported set "
                           f"(digits, A-Z, a-z)") from None


def validate_text(text: str) -> str:
    """Check every character of ``text`` is in the set; return it unchanged."""
    for ch in text:
        char_index(ch)
    return text
