"""Numeric substrate: tensors with reverse-mode differentiation and gradient checking."""
