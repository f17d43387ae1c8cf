"""Deterministic synthetic chains with a ground-truth ledger."""

from .generator import FixtureSpec, generate, generate_chain

__all__ = ["FixtureSpec", "generate", "generate_chain"]
