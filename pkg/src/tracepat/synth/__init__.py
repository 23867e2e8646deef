"""Synthetic trace generation with ground truth."""

from tracepat.synth.generator import (
    REFERENCE_DENSITY,
    GroundTruth,
    InfeasiblePlant,
    PlantDistribution,
    PlantSpec,
    SynthCorpus,
    generate_corpus,
    generate_session,
    load_manifest,
    place_plants,
)
from tracepat.synth.oracle import StepLabel, oracle_instances

__all__ = [
    "REFERENCE_DENSITY",
    "GroundTruth",
    "InfeasiblePlant",
    "PlantDistribution",
    "PlantSpec",
    "StepLabel",
    "SynthCorpus",
    "generate_corpus",
    "generate_session",
    "load_manifest",
    "oracle_instances",
    "place_plants",
]
