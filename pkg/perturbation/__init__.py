# Noise injection and Monte-Carlo sampling
