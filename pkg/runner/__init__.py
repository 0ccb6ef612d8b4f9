"""Run orchestration: configuration, training, evaluation, ablation and checks."""
