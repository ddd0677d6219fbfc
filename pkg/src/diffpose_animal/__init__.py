"""Pakiet diffpose-animal: estymacja pozy jako warunkowe odszumianie heatmap."""
__all__ = []
