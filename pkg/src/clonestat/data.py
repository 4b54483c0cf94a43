"""Tidy observation container shared by likelihood evaluation and the CLI.

One row per observation: (experiment, time, variable, value).  Partial
state observation is the norm — a model may expose several observable
variables and a dataset may carry any subset per experiment.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = ["Observation", "Dataset"]


class Observation(NamedTuple):
    experiment: str
    time: float
    variable: str
    value: float


class Dataset:
    """Validated observation rows, grouped for fast per-experiment access."""

    def __init__(self, rows):
        self.rows = [Observation(str(r[0]), float(r[1]), str(r[2]), float(r[3])) for r in rows]
        if not self.rows:
            raise ValueError("dataset has no observations")
        seen_last: dict = {}
        for n, row in enumerate(self.rows):
            if not (np.isfinite(row.time) and np.isfinite(row.value)):
                raise ValueError(f"non-finite entry in row {n + 1}: {row}")
            key = (row.experiment, row.variable)
            if key in seen_last and row.time <= seen_last[key]:
                raise ValueError(
                    f"times not strictly increasing for experiment {row.experiment!r}, "
                    f"variable {row.variable!r} at t={row.time:g}"
                )
            seen_last[key] = row.time

        # Pack per experiment: sorted union of times plus per-variable
        # (time index, value) pairs, in input order of first appearance.
        self._packed: dict = {}
        order: list = []
        for row in self.rows:
            if row.experiment not in self._packed:
                self._packed[row.experiment] = {}
                order.append(row.experiment)
            self._packed[row.experiment].setdefault(row.variable, []).append((row.time, row.value))
        self.experiment_ids = tuple(order)
        self._by_exp: dict = {}
        for exp in self.experiment_ids:
            times = sorted({t for pairs in self._packed[exp].values() for t, _ in pairs})
            t_index = {t: i for i, t in enumerate(times)}
            per_var = {}
            for var, pairs in self._packed[exp].items():
                idx = np.array([t_index[t] for t, _ in pairs], dtype=int)
                vals = np.array([v for _, v in pairs], dtype=float)
                per_var[var] = (idx, vals)
            self._by_exp[exp] = (np.array(times, dtype=float), per_var)

    def __len__(self):
        return len(self.rows)

    @property
    def variables(self) -> frozenset:
        return frozenset(r.variable for r in self.rows)

    def experiment(self, exp_id: str):
        """(union of observation times, {variable: (time indices, values)})."""
        return self._by_exp[exp_id]

    def to_rows(self):
        return [tuple(r) for r in self.rows]
