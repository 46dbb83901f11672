"""Composable PDFs, data-parallel likelihood evaluation and bounded minimization."""

from .data import BinnedDataSet, EventTable, UnbinnedDataSet
from .engine import Backend, BoundModel, MetricKind, reduce, set_data
from .pdfs import (
    AddPdf,
    BreitWignerPdf,
    CompositePdf,
    ConvolutionPdf,
    ExpPdf,
    GaussianPdf,
    MappedPdf,
    PdfNode,
    PolynomialPdf,
    ProdPdf,
    raw_eval,
)
from .variables import (
    GridSpec,
    IndexTable,
    ParameterRegistry,
    Variable,
    finalize,
    new_observable,
    new_parameter,
)

__version__ = "0.1.0"

__all__ = [
    "AddPdf",
    "Backend",
    "BinnedDataSet",
    "BoundModel",
    "BreitWignerPdf",
    "CompositePdf",
    "ConvolutionPdf",
    "EventTable",
    "ExpPdf",
    "GaussianPdf",
    "GridSpec",
    "IndexTable",
    "MappedPdf",
    "MetricKind",
    "ParameterRegistry",
    "PdfNode",
    "PolynomialPdf",
    "ProdPdf",
    "UnbinnedDataSet",
    "Variable",
    "finalize",
    "new_observable",
    "new_parameter",
    "raw_eval",
    "reduce",
    "set_data",
]
