"""Joint zero-pronoun prediction and translation for pro-drop languages."""

__version__ = "0.1.0"
