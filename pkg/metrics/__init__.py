# Uncertainty metrics
