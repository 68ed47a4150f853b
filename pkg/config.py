"""
Walrus Settings
Retry cap, exact-arithmetic and enumeration limits for the solvers, and the
WALRUS_BUDGET verification budget read from the environment or a local .env
"""
import logging
import os
from pathlib import Path
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Get the base directory
BASE_DIR = Path(__file__).parent
ENV_FILE = BASE_DIR / ".env"

# Load environment variables from .env if present
load_dotenv(dotenv_path=ENV_FILE, override=False)

BUDGET_ENV_KEY = "WALRUS_BUDGET"
DEFAULT_VERIFICATION_BUDGET = 2 ** 22

# Solver defaults (overridable per run from the CLI)
DEFAULT_RETRY_CAP = 10
GS_EXACT_DIMENSION_LIMIT = 6
BRUTE_FORCE_DEMAND_LIMIT = 2 ** 20
EXACT_COVER_ITEM_LIMIT = 12
GS_CHECK_ITEM_LIMIT = 8
DEFAULT_LOG_LEVEL = "WARNING"


def get_verification_budget() -> int:
    """
    Get the verification enumeration budget from:
    1. Environment variable (WALRUS_BUDGET)
    2. .env file next to this module
    Returns the default budget if unset or invalid
    """
    raw = os.getenv(BUDGET_ENV_KEY)
    if raw is None or raw.strip() == "":
        return DEFAULT_VERIFICATION_BUDGET
    try:
        budget = int(raw.strip())
    except ValueError:
        logger.warning(
            "Invalid %s '%s' (expected an integer). Falling back to %d",
            BUDGET_ENV_KEY, raw, DEFAULT_VERIFICATION_BUDGET,
        )
        return DEFAULT_VERIFICATION_BUDGET
    if budget <= 0:
        logger.warning(
            "Invalid %s '%s' (must be positive). Falling back to %d",
            BUDGET_ENV_KEY, raw, DEFAULT_VERIFICATION_BUDGET,
        )
        return DEFAULT_VERIFICATION_BUDGET
    return budget


def resolve_budget(budget=None) -> int:
    """Explicit budget if given, else the configured one."""
    if budget is not None:
        return int(budget)
    return get_verification_budget()
