"""Unit tests for the proximal point verifier."""
