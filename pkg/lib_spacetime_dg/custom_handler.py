from typing import Dict, Optional

from .handler import exception_handler
from .renderer import envelope


def custom_exception_handler(exc: BaseException, context: Optional[Dict] = None) -> Optional[Dict]:
    # None means the caller should re-raise
    report = exception_handler(exc, context or {})
    if report is None:
        return None
    return envelope(report["exit_code"], error=report)
