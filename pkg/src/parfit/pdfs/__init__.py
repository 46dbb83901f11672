from .base import PdfNode, midpoints, raw_eval, standalone_table
from .combinators import AddPdf, CompositePdf, ConvolutionPdf, MappedPdf, ProdPdf
from .primitives import BreitWignerPdf, ExpPdf, GaussianPdf, PolynomialPdf

__all__ = [
    "AddPdf",
    "BreitWignerPdf",
    "CompositePdf",
    "ConvolutionPdf",
    "ExpPdf",
    "GaussianPdf",
    "MappedPdf",
    "PdfNode",
    "PolynomialPdf",
    "ProdPdf",
    "midpoints",
    "raw_eval",
    "standalone_table",
]
