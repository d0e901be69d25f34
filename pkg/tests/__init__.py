"""Tests for the econform package."""
