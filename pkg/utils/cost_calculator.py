"""
Cost Calculator for Oracle Usage
Weights oracle call counts by the unit cost of each oracle kind
"""

from typing import Dict, Mapping, Optional, Union

from core.valuations import OracleCounter

# Unit costs per call, in value-oracle equivalents.
# A demand query costs about n value queries, an aggregate demand query about mn.
ORACLE_COSTS = {
    'value': lambda n, m: 1,
    'demand': lambda n, m: n,
    'aggregate': lambda n, m: m * n,
}

COUNTER_FIELDS = {
    'value': 'value_calls',
    'demand': 'demand_calls',
    'aggregate': 'aggregate_calls',
}


def get_oracle_costs(n: int, m: int, overrides: Optional[Mapping[str, int]] = None) -> Dict[str, int]:
    """
    Get unit costs for a market with n items and m buyers.
    Entries in `overrides` replace the defaults; unknown kinds are rejected.
    """
    costs = {kind: int(rule(n, m)) for kind, rule in ORACLE_COSTS.items()}
    for kind, cost in (overrides or {}).items():
        if kind not in costs:
            raise ValueError(f"Unknown oracle kind '{kind}'. Expected one of: {', '.join(costs)}")
        costs[kind] = int(cost)
    return costs


def calculate_cost(
    counter: Union[OracleCounter, Mapping[str, int]],
    n: int,
    m: int,
    overrides: Optional[Mapping[str, int]] = None,
) -> Dict[str, int]:
    """
    Calculate the weighted cost of an oracle transcript.

    Args:
        counter: OracleCounter or its as_dict() form
        n: Number of items
        m: Number of buyers
        overrides: Optional unit costs per oracle kind

    Returns:
        Dictionary with '<kind>_cost' per kind and 'total_cost'
    """
    counts = counter.as_dict() if isinstance(counter, OracleCounter) else dict(counter)
    costs = get_oracle_costs(n, m, overrides)

    result = {}
    total = 0
    for kind, unit in costs.items():
        calls = int(counts.get(COUNTER_FIELDS[kind], counts.get(kind, 0)))
        result[f'{kind}_cost'] = calls * unit
        total += calls * unit
    result['total_cost'] = total
    return result


def format_cost(cost: int) -> str:
    """
    Format a cost for display.

    Returns:
        Formatted string (e.g., "850", "12.3k", "4.56M") in value-query units
    """
    if cost < 1000:
        return f"{cost}"
    elif cost < 1_000_000:
        return f"{cost / 1000:.1f}k"
    else:
        return f"{cost / 1_000_000:.2f}M"
