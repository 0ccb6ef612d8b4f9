"""Gradient-check units run by the check orchestrator."""
