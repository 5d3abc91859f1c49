"""Deterministic knowledge-graph reasoning benchmarks for LLM evaluation.

The package builds question/answer instances over sampled knowledge-graph
subgraphs, renders each subgraph in five textual formats, queries chat
endpoints (or offline mocks), and aggregates scores into report tables.
"""

from kgtextbench.graph import KnowledgeGraph, Triple, load_labeled_tsv
from kgtextbench.sampler import SamplingParams, Subgraph, sample_subgraph
from kgtextbench.textualize import FormatId, TextualizedPrompt, render

__version__ = "0.1.0"

__all__ = [
    "FormatId",
    "KnowledgeGraph",
    "SamplingParams",
    "Subgraph",
    "TextualizedPrompt",
    "Triple",
    "load_labeled_tsv",
    "render",
    "sample_subgraph",
    "__version__",
]
