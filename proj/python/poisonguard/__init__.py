"""Backdoor poisoning defense pipeline."""

from ._poisonguard import *  # noqa: F401,F403
from ._poisonguard import __doc__  # noqa: F401

__version__ = "0.1.0"
