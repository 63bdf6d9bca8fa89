"""Utility package for the csf command line.

Keep small helper functions here to avoid duplication across command modules.
"""
