"""Spotting targeted short posts by combining their text with the
interaction network they travel through.

Sub-modules
-----------
graph       line graph, random walk and smoothness Laplacian
features    tokenizer, n-gram and auxiliary features, feature groups
solver      graph-regularized sparse group lasso (IRLS)
evaluation  metrics, splits and the content/network ablation
synth       planted-community synthetic datasets
formats     text file formats
cli         ``netcontent`` command line
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DataIOError,
    NetContentError,
    NotErgodicError,
    NumericalError,
    SingularSystemError,
    ValidationError,
)
