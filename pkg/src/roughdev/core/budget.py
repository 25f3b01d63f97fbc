"""
Work budgets — count solver subintervals, Monte Carlo runs and optimizer
iterations against a limit.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel

from roughdev.core.errors import BudgetExhaustedError


class Budget(BaseModel):
    name: str = "work"
    limit: Optional[int] = None
    used: int = 0

    @property
    def remaining(self) -> Optional[int]:
        if self.limit is None:
            return None
        return max(self.limit - self.used, 0)

    @property
    def exhausted(self) -> bool:
        return self.limit is not None and self.used >= self.limit

    def consume(self, units: int = 1) -> bool:
        """Record ``units`` of work. Returns False once the limit has been reached."""
        if self.exhausted:
            return False
        self.used += units
        return True

    def check(self) -> None:
        if self.exhausted:
            raise BudgetExhaustedError(
                f"{self.name} budget of {self.limit} exhausted",
                budget=self.name,
                used=self.used,
            )
