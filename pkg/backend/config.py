"""
Engine configuration.

Module constants hold the defaults; EngineConfig bundles the options that
travel with an engine instance (and into worker processes).
"""

import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field


# ─── Configuration ───────────────────────────────────────────
SIGMA_WIDTH = 2              # bytes per σ cell on disk (1+2+8 layout)
SIGMA_WIDTHS = (2, 4, 8)
MAX_STORED_DISTANCE = 254    # 0xFF is reserved for "unreachable"
ORACLE_MAX_VERTICES = 2000   # all-pairs enumeration guard
REFERENCE_MAX_VERTICES = 5000
SCORE_DIGITS = 12            # significant digits in every CSV output
GN_TIE_TOLERANCE = 1e-9      # relative; edges this close to the max are tied
STAGING_ENV = "SBC_STAGING_DIR"
# ─────────────────────────────────────────────────────────────


def default_staging_dir() -> Optional[Path]:
    """Staging directory from the environment, or None (use the store's own directory)."""
    value = os.environ.get(STAGING_ENV)
    return Path(value) if value else None


class EngineConfig(BaseModel):
    """Runtime options shared by the coordinator and its workers."""
    sigma_width: int = SIGMA_WIDTH
    one_level_drop: bool = True          # optimized route for removals that drop exactly one level
    executor: Literal["inline", "process"] = "inline"
    workers: int = Field(default=1, ge=1)
    storage: Literal["memory", "disk"] = "memory"
    staging_dir: Optional[str] = None

    def staging_path(self, fallback: Path) -> Path:
        if self.staging_dir:
            return Path(self.staging_dir)
        return default_staging_dir() or fallback


def format_score(value: float) -> str:
    """Fixed significant-digit rendering shared by every CSV output (`2.0`, not `2`)."""
    text = f"{value:.{SCORE_DIGITS}g}"
    if not any(c in text for c in ".einf"):
        text += ".0"
    return text
