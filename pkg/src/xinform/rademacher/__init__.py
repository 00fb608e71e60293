"""Sup-correlation solvers, Rademacher estimators and gap reports."""
from .constraints import (AnchorHolds, GradientAt, LabeledSample, LocallyStableGradient, MeanEquals, ShapEquals,
                          SignAt, SignOnBall, SupResult, TopComponentAt, ValueAt, constraint_from_json,
                          constraints_from_json, constraints_to_json)
from .estimate import (CSV_COLUMNS, EventSpec, GapReport, RademacherEstimate, append_csv, conditional_rademacher,
                       csv_text, decomposition_check, default_workers, draw_sample, empirical_rademacher, gap_report)
from .solve import construct_witness, sup_correlation
from .verify import satisfies, violations

__all__ = [
    "AnchorHolds", "GradientAt", "LabeledSample", "LocallyStableGradient", "MeanEquals", "ShapEquals", "SignAt",
    "SignOnBall", "SupResult", "TopComponentAt", "ValueAt", "constraint_from_json", "constraints_from_json",
    "constraints_to_json", "CSV_COLUMNS", "EventSpec", "GapReport", "RademacherEstimate", "append_csv",
    "conditional_rademacher", "csv_text", "decomposition_check", "default_workers", "draw_sample",
    "empirical_rademacher", "gap_report",
    "construct_witness", "sup_correlation", "satisfies", "violations",
]
