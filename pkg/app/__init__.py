"""CKA-driven architecture refinement engine."""
