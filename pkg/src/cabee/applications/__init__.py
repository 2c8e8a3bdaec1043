"""Desk-scale application families built on the core machinery."""

from __future__ import annotations


class HypothesesUnmet(ValueError):
    """A closed-form construction's preconditions fail for these parameters."""
