"""Interactive optimal-surface segmentation engine."""
