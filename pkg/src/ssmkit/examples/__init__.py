"""Bundled example model declarations."""
