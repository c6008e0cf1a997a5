"""Vehicle-level MTBF estimation from perception error rates.

Thin python surface over the C++ core: collision kinematics, the
probability-tree failure model, perception error classification and the
Monte Carlo validation of the analytical rates. Tree and table documents
cross the boundary as JSON; the helpers below return plain dicts.
"""

import json as _json

from avmtbf._core import (  # noqa: F401
    BrakingProfile,
    DataError,
    RssParams,
    ValidationError,
    __version__,
    evaluate_tree_json,
    extract_situations,
    failure_rate_simple,
    false_alarm_delta_v,
    human_baseline_mtbf_hours,
    impact_delta_v_standing,
    is_safety_relevant_type1,
    is_safety_relevant_type2,
    is_severe_delta_v,
    kappa,
    kmh_to_ms,
    ms_to_kmh,
    required_error_rate,
    rss_longitudinal_distance,
    severity_from_delta_v,
    simulate_leaf,
    simulate_tree_json,
    ttc,
)


def evaluate_tree(tree: dict) -> dict:
    """Evaluate a failure model tree document (see the avmtbf-tree/1 schema)."""
    return _json.loads(evaluate_tree_json(_json.dumps(tree)))


def simulate_tree(tree: dict, horizon_hours: float = 1.0, trials: int = 10000,
                  seed: int = 0) -> dict:
    """Monte Carlo estimate of a tree's failure rate; reproducible per seed."""
    return simulate_tree_json(_json.dumps(tree), horizon_hours, trials, seed)


def situation_table(input_path, boundaries_kmh, **options) -> dict:
    """Mine a situation probability table from trajectory recordings."""
    return _json.loads(extract_situations(str(input_path), list(boundaries_kmh), **options))
