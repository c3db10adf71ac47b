# Core numerical primitives
