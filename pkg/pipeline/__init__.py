# Experiment orchestration
