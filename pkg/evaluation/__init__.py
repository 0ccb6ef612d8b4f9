"""Frame-level mAP@0.5 evaluation."""
