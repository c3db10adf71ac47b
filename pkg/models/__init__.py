# Trainable classifiers
