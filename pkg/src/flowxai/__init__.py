"""Explainable flow-based intrusion detection.

Train a transformer classifier on flow features, attribute its decisions
with integrated gradients, distill them into a surrogate rule set, turn
rules and attributions into natural-language explanations through chat
LLMs, and score those explanations for structure, semantic similarity,
attribution faithfulness and actionability.
"""

from .attribution import AttributionConfig, AttributionVector, integrated_gradients, global_importance
from .classifier import FlowTransformerClassifier
from .config import RunConfig, load_config
from .explain import (Explanation, ExplanationRequest, LlmConfig,
                      MockChatProvider, build_generator_prompt, parse_explanation)
from .ingest import CategoricalEncoder, Dataset, FlowScaler, load_csv, stratified_split
from .metrics import class_report, latency_bench, roc_pr_points
from .surrogate import (RuleClause, RuleSetMetrics, SurrogateTreeClassifier,
                        extract_rules, prune_least_supported, pruning_curve)
from .synth import SynthConfig, generate, generate_table, write_csv
from .validate import (DirectionLexicon, attribution_faithfulness, check_structure,
                       parse_actionability, semantic_similarity)

__version__ = "0.1.0"

__all__ = [
    "AttributionConfig", "AttributionVector", "CategoricalEncoder", "Dataset",
    "DirectionLexicon", "Explanation", "ExplanationRequest", "FlowScaler",
    "FlowTransformerClassifier", "LlmConfig", "MockChatProvider", "RuleClause",
    "RuleSetMetrics", "RunConfig", "SurrogateTreeClassifier", "SynthConfig",
    "attribution_faithfulness", "build_generator_prompt", "check_structure",
    "class_report", "extract_rules", "generate", "generate_table",
    "global_importance", "integrated_gradients", "latency_bench", "load_config",
    "load_csv", "parse_actionability", "parse_explanation",
    "prune_least_supported", "pruning_curve", "roc_pr_points",
    "semantic_similarity", "stratified_split", "write_csv",
]
