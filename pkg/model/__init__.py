"""Context head: neural blocks, feature pipeline, head wiring and optimiser."""
