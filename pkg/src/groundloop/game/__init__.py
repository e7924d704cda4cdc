"""Deterministic text-game engine and fixtures."""
