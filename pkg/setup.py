"""Shim for older pip versions that don't support pyproject.toml editable installs."""

from setuptools import setup

setup()
