"""Interpretation of digitally captured clock drawings: numeral segmentation, overwrite
unpeeling, CRF labelling and segmentation repair."""

__version__ = "0.1.0"
