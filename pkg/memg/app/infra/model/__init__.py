"""Persisted document models."""
