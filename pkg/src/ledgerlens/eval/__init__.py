from .bias import BiasAuditReport, bias_audit, load_parcel_tracts_csv, load_tracts_csv, pearson
from .c2st import C2stResult, c2st_mar_test, normal_p_value
from .cost import REFERENCE_SCENARIO, CostReport, CostScenario, cost_estimate
from .metrics import MetricsReport, compute_metrics, format_metrics_table, metrics_full_and_trimmed, trim_middle_90

__all__ = [
    "BiasAuditReport", "bias_audit", "load_parcel_tracts_csv", "load_tracts_csv", "pearson", "C2stResult",
    "c2st_mar_test", "normal_p_value", "REFERENCE_SCENARIO", "CostReport", "CostScenario", "cost_estimate",
    "MetricsReport", "compute_metrics", "format_metrics_table", "metrics_full_and_trimmed", "trim_middle_90",
]
