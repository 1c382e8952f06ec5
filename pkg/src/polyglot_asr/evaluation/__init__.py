from .report import FootprintTable, emit_report, render
from .resources import ResourceReport, RunSeries, latency_summary, measure_resources
from .routing import ConfusionMatrix, SelectionStats, expected_rates, simulate_routing
from .wer import WerResult, WerTable, aggregate_wer, align, tokenize, wer

__all__ = [
    "ConfusionMatrix",
    "FootprintTable",
    "ResourceReport",
    "RunSeries",
    "SelectionStats",
    "WerResult",
    "WerTable",
    "aggregate_wer",
    "align",
    "emit_report",
    "expected_rates",
    "latency_summary",
    "measure_resources",
    "render",
    "simulate_routing",
    "tokenize",
    "wer",
]
