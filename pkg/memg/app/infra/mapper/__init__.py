"""Mappers between engine results and persisted documents."""
