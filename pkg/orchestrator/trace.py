"""Per-round convergence records."""
from dataclasses import asdict, dataclass, field
from typing import Optional

TRACE_FIELDS = (
    'round',
    'objective',
    'lagrangian',
    'lagrangian_primal',
    'primal_residual',
    'dual_residual',
    'w_change',
    'f_change',
    'wall_time',
    'metrics',
)


@dataclass
class RoundRecord:
    round: int
    objective: float
    lagrangian: float
    lagrangian_primal: float
    primal_residual: float
    dual_residual: float
    w_change: float = 0.0
    f_change: float = 0.0
    wall_time: Optional[float] = None
    metrics: Optional[dict] = None

    def as_dict(self):
        return asdict(self)


@dataclass
class ConvergenceTrace:
    initial_lagrangian: Optional[float] = None
    initial_objective: Optional[float] = None
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def append(self, record):
        if self.records and record.round <= self.records[-1].round:
            raise ValueError(f"Round {record.round} is not after round {self.records[-1].round}")
        self.records.append(record)

    @property
    def last(self):
        return self.records[-1] if self.records else None

    def column(self, name):
        return [getattr(record, name) for record in self.records]

    def primal_descent_violations(self, slack=1e-9):
        """
        Rounds whose post-Z-update Lagrangian exceeds the Lagrangian the round started from.
        """
        violations = []
        previous = self.initial_lagrangian
        for record in self.records:
            if previous is not None and record.lagrangian_primal > previous + slack * max(1.0, abs(previous)):
                violations.append(record.round)
            previous = record.lagrangian
        return violations
