# Artifact storage
