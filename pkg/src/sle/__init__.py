"""Subjective-logic label encodings: opinion algebra, aggregation, and learning."""

from .opinions import (
    ConstraintError,
    DegenerateFusionError,
    DirichletParams,
    DogmaticOpinionError,
    Opinion,
    ReliabilityScore,
    cumulative_fuse,
    digamma,
    dirichlet_kl,
    dirichlet_mode,
    from_dirichlet,
    fuse_many,
    lgamma,
    opinion_new,
    project_probability,
    smooth,
    to_dirichlet,
    trigamma,
    trust_discount,
    uniform_base_rate,
    vacuous_opinion,
)
from .encoding import AnnotationRecord, EncodedTarget, build_sle, encode_annotation
from .synth import SyntheticConfig, SyntheticDataset, generate, recalibrate, simplex_grid

__version__ = "0.1.0"
