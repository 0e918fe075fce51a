"""Shipped experiment presets (JSON .cfg files)."""
