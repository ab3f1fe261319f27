"""Shipped Lie algebra fixtures (JSON)."""
