"""Estimator-style wrappers around the scheduler and the attack solvers.

Each wrapper follows the scikit-learn protocol: constructor arguments are
stored verbatim, all work happens in fit(net, flows), and fitted state
lands in trailing-underscore attributes.  get_params, set_params, and
clone therefore behave as usual, which makes the solvers easy to drop
into parameter grids and pipelines that sweep budgets or tolerances.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .attacks import AttackInstance, AttackKind, AttackTarget, solve_attack
from .scheduling import (
    accumulation_rates,
    cycle_length,
    is_feasible,
    service_rates,
    solve_fixed_time,
)


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(
            f"this {type(est).__name__} instance is not fitted yet; "
            "call fit(net, flows) first"
        )


class FixedTimeScheduler(BaseEstimator):
    """Fixed-time schedule optimizer with an estimator interface.

    fit computes the minimum-green-time schedule for the given network and
    flow readings; transform maps flow readings to the per-movement
    accumulation rates the fitted schedule would produce.
    """

    def __init__(self, lost_time=1.0, sample_rate=1.0, feas_tol=1e-9, opt_tol=1e-9):
        self.lost_time = lost_time
        self.sample_rate = sample_rate
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol

    def fit(self, net, flows):
        schedule = solve_fixed_time(
            net, flows, feas_tol=self.feas_tol, opt_tol=self.opt_tol
        )
        self.net_ = net
        self.schedule_ = schedule
        self.stage_fractions_ = schedule.stage_fractions
        self.intersection_loads_ = dict(
            zip(schedule.intersection_ids, schedule.intersection_loads)
        )
        self.service_rates_ = service_rates(net, schedule)
        report = is_feasible(schedule)
        self.feasible_ = report.feasible
        self.cycle_length_ = (
            cycle_length(schedule, self.lost_time, self.sample_rate)
            if report.feasible
            else np.inf
        )
        return self

    def transform(self, flows):
        _check_fitted(self, "schedule_")
        return accumulation_rates(self.net_, flows, self.schedule_)

    def fit_transform(self, net, flows):
        return self.fit(net, flows).transform(flows)


class _AttackEstimator(BaseEstimator):
    """Shared fit logic for the attack wrappers."""

    _kind = None

    def __init__(
        self,
        budget=1,
        epsilon=1e-6,
        flow_bound=None,
        gap_tol=1e-6,
        node_limit=None,
        time_limit=None,
        warm_start=True,
    ):
        self.budget = budget
        self.epsilon = epsilon
        self.flow_bound = flow_bound
        self.gap_tol = gap_tol
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.warm_start = warm_start

    def _instance(self):
        return AttackInstance(
            kind=self._kind,
            budget=self.budget,
            epsilon=self.epsilon,
            flow_bound=self.flow_bound,
        )

    def fit(self, net, flows):
        result = solve_attack(
            net,
            flows,
            self._instance(),
            node_limit=self.node_limit,
            time_limit=self.time_limit,
            gap_tol=self.gap_tol,
            warm_start=self.warm_start,
        )
        self.net_ = net
        self.result_ = result
        self.status_ = result.status
        self.objective_ = result.objective
        self.bound_ = result.bound
        self.compromised_ = result.compromised
        self.falsified_flows_ = result.flows
        self.schedule_ = result.realized_schedule
        self.accumulation_ = result.accumulation
        self.nodes_ = result.nodes
        total = float(np.sum(flows.values))
        if result.accumulation is not None and total > 0:
            self.nv_ = float(np.sum(result.accumulation) / total)
        else:
            self.nv_ = None
        return self

    def transform(self, flows):
        """Accumulation the fitted attack's schedule causes on the flows."""
        _check_fitted(self, "schedule_")
        if self.schedule_ is None:
            raise NotFittedError("the fitted attack produced no schedule")
        return accumulation_rates(self.net_, flows, self.schedule_)


class WorstNetworkAttack(_AttackEstimator):
    """Budget-constrained falsification maximizing total accumulation."""

    _kind = AttackKind.WORST_NETWORK


class WorstLaneAttack(_AttackEstimator):
    """Budget-constrained falsification minimizing one lane's service."""

    _kind = AttackKind.WORST_LANE

    def __init__(
        self,
        target_lane=None,
        budget=1,
        epsilon=1e-6,
        flow_bound=None,
        gap_tol=1e-6,
        node_limit=None,
        time_limit=None,
        warm_start=True,
    ):
        super().__init__(
            budget=budget,
            epsilon=epsilon,
            flow_bound=flow_bound,
            gap_tol=gap_tol,
            node_limit=node_limit,
            time_limit=time_limit,
            warm_start=warm_start,
        )
        self.target_lane = target_lane

    def _instance(self):
        return AttackInstance(
            kind=self._kind,
            budget=self.budget,
            target_lane=self.target_lane,
            epsilon=self.epsilon,
            flow_bound=self.flow_bound,
        )


class RiskAverseAttack(_AttackEstimator):
    """Least-detectable falsification meeting service-degradation targets.

    targets is a sequence of (from_link, to_link, alpha) triples or
    AttackTarget instances; norm picks the deviation measure ("inf" or
    "l1") whose minimum the solver certifies.
    """

    _kind = AttackKind.RISK_AVERSE

    def __init__(
        self,
        targets=(),
        norm="inf",
        budget=1,
        epsilon=1e-6,
        flow_bound=None,
        gap_tol=1e-6,
        node_limit=None,
        time_limit=None,
        warm_start=True,
    ):
        super().__init__(
            budget=budget,
            epsilon=epsilon,
            flow_bound=flow_bound,
            gap_tol=gap_tol,
            node_limit=node_limit,
            time_limit=time_limit,
            warm_start=warm_start,
        )
        self.targets = targets
        self.norm = norm

    def _instance(self):
        targets = tuple(
            t if isinstance(t, AttackTarget) else AttackTarget(*t)
            for t in self.targets
        )
        return AttackInstance(
            kind=self._kind,
            budget=self.budget,
            targets=targets,
            norm=self.norm,
            epsilon=self.epsilon,
            flow_bound=self.flow_bound,
        )
