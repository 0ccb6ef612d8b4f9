"""Synthetic clip world and the frozen backbone stand-in."""
