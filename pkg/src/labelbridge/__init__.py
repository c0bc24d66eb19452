"""Cross-tagset label consolidation."""
