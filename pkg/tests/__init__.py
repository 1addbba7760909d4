"""Tests for face-graph-verifier."""
