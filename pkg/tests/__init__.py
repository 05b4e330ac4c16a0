"""Tests for rnd."""
