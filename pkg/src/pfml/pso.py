"""Particle-swarm tuning of every free trapezoid parameter in a controller.

Adjacent terms of each variable share their boundary abscissae, so an n-term
variable contributes 2(n-1) free parameters; the standard seven-variable
knowledge base encodes to a 26-dimensional position vector.  Tying keeps the
domain covered under any feasible position, and feasibility (per-group
ascending, within the variable domain) is restored after every move by a
clamp-then-sort repair.

The swarm minimizes the mean squared error between inferred and desired win
rates over the training records; a record for which no rule fires scores the
worst-case squared error of 1.0.  All randomness comes from one seeded
generator, drawn in particle-then-dimension order, so runs are bitwise
reproducible regardless of how fitness evaluations are parallelized.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .fml import FuzzyController
from .inference import (
    GRID_POINTS,
    EmptyDataset,
    FEATURE_FIELDS,
    InferenceError,
    OutOfDomain,
    UnknownTerm,
    UnknownVariable,
    midpoint_grid,
    trapezoid_grid,
)


class PsoError(Exception):
    """Base class for learner failures."""


class StructureMismatch(PsoError):
    """The controller does not have the tied-boundary structure."""


class InfeasiblePosition(PsoError):
    """A position vector violates the per-group ascending/bounds constraints."""


@dataclass(frozen=True)
class ParameterGroup:
    variable: str
    size: int
    lower: float
    upper: float


@dataclass(frozen=True)
class ParameterEncoding:
    """Layout of the free-parameter vector: one group per variable, in
    knowledge-base declaration order."""

    groups: tuple[ParameterGroup, ...]

    @property
    def dimension(self) -> int:
        return sum(g.size for g in self.groups)

    def starts(self) -> list[int]:
        starts, total = [], 0
        for group in self.groups:
            starts.append(total)
            total += group.size
        return starts

    def lower_bounds(self) -> np.ndarray:
        return np.concatenate([np.full(g.size, g.lower) for g in self.groups])

    def upper_bounds(self) -> np.ndarray:
        return np.concatenate([np.full(g.size, g.upper) for g in self.groups])

    def repair_matrix(self, positions: np.ndarray) -> np.ndarray:
        """Clamp every value into its group's domain, then sort each group
        ascending.  Row-wise over a (particles, dimension) matrix."""
        out = np.array(positions, dtype=float)
        start = 0
        for group in self.groups:
            block = out[:, start : start + group.size]
            np.clip(block, group.lower, group.upper, out=block)
            block.sort(axis=1)
            start += group.size
        return out

    @classmethod
    def from_controller(cls, controller: FuzzyController) -> "ParameterEncoding":
        groups = []
        for var in controller.knowledge_base:
            terms = var.terms
            if not terms:
                raise StructureMismatch(f"variable {var.name!r} has no terms")
            first, last = terms[0].shape, terms[-1].shape
            if not (first.p1 == first.p2 == var.domain_left):
                raise StructureMismatch(
                    f"{var.name!r}: first term is not pinned to the left domain edge"
                )
            if not (last.p3 == last.p4 == var.domain_right):
                raise StructureMismatch(
                    f"{var.name!r}: last term is not pinned to the right domain edge"
                )
            for left, right in zip(terms, terms[1:]):
                if not (left.shape.p3 == right.shape.p1 and left.shape.p4 == right.shape.p2):
                    raise StructureMismatch(
                        f"{var.name!r}: terms {left.name!r} and {right.name!r} "
                        "do not share their boundary abscissae"
                    )
            groups.append(
                ParameterGroup(var.name, 2 * (len(terms) - 1), var.domain_left, var.domain_right)
            )
        return cls(tuple(groups))


def encode_parameters(controller: FuzzyController) -> np.ndarray:
    """Concatenated free parameters, one group per variable in declaration
    order; a group holds the (p3, p4) boundary pair of every term but the
    last."""
    ParameterEncoding.from_controller(controller)  # structure check
    values = []
    for var in controller.knowledge_base:
        for term in var.terms[:-1]:
            values.append(term.shape.p3)
            values.append(term.shape.p4)
    return np.array(values, dtype=float)


def _check_feasible(position: np.ndarray, encoding: ParameterEncoding) -> None:
    if position.shape != (encoding.dimension,):
        raise InfeasiblePosition(
            f"expected {encoding.dimension} parameters, got shape {position.shape}"
        )
    start = 0
    for group in encoding.groups:
        g = position[start : start + group.size]
        start += group.size
        if g.size == 0:
            continue
        if g[0] < group.lower or g[-1] > group.upper or np.any(np.diff(g) < 0):
            raise InfeasiblePosition(
                f"group {group.variable!r} is not ascending within "
                f"[{group.lower}, {group.upper}]"
            )


def decode_parameters(position, template: FuzzyController) -> FuzzyController:
    """Rebuild a controller from a feasible position.

    Tie constraints are re-imposed, term names/hedges and the rule base are
    taken unchanged from the template.  Inverse of
    :func:`encode_parameters` on tied-boundary controllers.
    """
    position = np.asarray(position, dtype=float)
    encoding = ParameterEncoding.from_controller(template)
    _check_feasible(position, encoding)
    new_vars = []
    start = 0
    for var, group in zip(template.knowledge_base, encoding.groups):
        g = position[start : start + group.size]
        start += group.size
        bounds = [var.domain_left, var.domain_left]
        bounds.extend(float(v) for v in g)
        bounds.extend((var.domain_right, var.domain_right))
        terms = tuple(
            replace(
                term,
                shape=replace(
                    term.shape,
                    p1=bounds[2 * k],
                    p2=bounds[2 * k + 1],
                    p3=bounds[2 * k + 2],
                    p4=bounds[2 * k + 3],
                ),
            )
            for k, term in enumerate(var.terms)
        )
        new_vars.append(replace(var, terms=terms))
    return replace(template, knowledge_base=tuple(new_vars))


def repair_position(position, encoding: ParameterEncoding) -> np.ndarray:
    """Clamp-then-sort a single position into feasibility.  Idempotent."""
    return encoding.repair_matrix(np.asarray(position, dtype=float)[None, :])[0]


class _Evaluator:
    """Vectorized mean-squared-error fitness of encoded positions.

    Compiles the template's rule structure into index arrays once, then
    evaluates whole batches of positions with numpy.  Arithmetic mirrors the
    scalar inference path step for step (same membership expressions, same
    min/max combinations, same midpoint-grid summation), so batch and scalar
    results agree to within last-ulp summation differences.
    """

    def __init__(self, template: FuzzyController, records, grid_points: int = GRID_POINTS):
        records = list(records)
        if not records:
            raise EmptyDataset("no training records")
        self.encoding = ParameterEncoding.from_controller(template)
        self.variables = template.knowledge_base
        self.group_starts = self.encoding.starts()

        outputs = [i for i, v in enumerate(self.variables) if v.var_type == "output"]
        if len(outputs) != 1:
            raise StructureMismatch(
                f"controller must declare exactly one output variable, found {len(outputs)}"
            )
        self.out_index = outputs[0]
        self.input_indices = [
            i for i, v in enumerate(self.variables) if v.var_type == "input"
        ]

        self.features = []
        for i in self.input_indices:
            var = self.variables[i]
            attr = FEATURE_FIELDS.get(var.name)
            if attr is None:
                raise StructureMismatch(
                    f"feature records carry no value for input variable {var.name!r}"
                )
            column = np.array([getattr(r, attr) for r in records], dtype=float)
            if np.any(column < var.domain_left) or np.any(column > var.domain_right):
                raise OutOfDomain(f"record value outside the {var.name!r} domain")
            self.features.append(column)
        self.y = np.array([r.desired_output for r in records], dtype=float)

        term_column = {}
        total = 0
        for i in self.input_indices:
            var = self.variables[i]
            for k, term in enumerate(var.terms):
                term_column[(var.name, term.name)] = total + k
            total += len(var.terms)
        input_names = {self.variables[i].name for i in self.input_indices}

        rules = template.rule_base.rules
        out_var = self.variables[self.out_index]
        out_term_index = {t.name: k for k, t in enumerate(out_var.terms)}
        max_clauses = max((len(r.antecedent) for r in rules), default=1)
        ones_col, zeros_col = total, total + 1  # neutral pads for MIN and MAX
        self.idx_min = np.full((len(rules), max_clauses), ones_col, dtype=np.intp)
        self.idx_max = np.full((len(rules), max_clauses), zeros_col, dtype=np.intp)
        self.is_and = np.ones(len(rules), dtype=bool)
        self.weights = np.ones(len(rules))
        rules_by_term: list[list[int]] = [[] for _ in out_var.terms]
        for r_i, rule in enumerate(rules):
            if not rule.antecedent:
                raise InferenceError(f"rule {rule.name!r} has an empty antecedent")
            for c_i, clause in enumerate(rule.antecedent):
                if clause.variable not in input_names:
                    raise UnknownVariable(
                        f"rule {rule.name!r} references {clause.variable!r}, "
                        "which is not an input variable of the knowledge base"
                    )
                column = term_column.get((clause.variable, clause.term))
                if column is None:
                    raise UnknownTerm(
                        f"rule {rule.name!r} references unknown term {clause.term!r} "
                        f"of {clause.variable!r}"
                    )
                self.idx_min[r_i, c_i] = column
                self.idx_max[r_i, c_i] = column
            self.is_and[r_i] = rule.connector != "or"
            self.weights[r_i] = rule.weight
            for clause in rule.consequent:
                if clause.variable != out_var.name:
                    raise UnknownVariable(
                        f"rule {rule.name!r} concludes on {clause.variable!r}, "
                        f"not the output variable {out_var.name!r}"
                    )
                t_i = out_term_index.get(clause.term)
                if t_i is None:
                    raise UnknownTerm(
                        f"rule {rule.name!r} concludes on unknown term {clause.term!r}"
                    )
                rules_by_term[t_i].append(r_i)
        self.all_and = bool(np.all(self.is_and))
        self.rules_by_term = [np.array(ix, dtype=np.intp) for ix in rules_by_term]
        self.xs = midpoint_grid(out_var.domain_left, out_var.domain_right, grid_points)

    def _var_memberships(self, positions: np.ndarray, var_index: int, xs: np.ndarray):
        """Membership of ``xs`` in every term of one variable, per particle:
        (particles, terms, len(xs))."""
        var = self.variables[var_index]
        group = self.encoding.groups[var_index]
        start = self.group_starts[var_index]
        n = len(var.terms)
        p = positions.shape[0]
        bounds = np.empty((p, 2 * n + 2))
        bounds[:, 0:2] = var.domain_left
        bounds[:, 2 : 2 + group.size] = positions[:, start : start + group.size]
        bounds[:, 2 * n :] = var.domain_right
        a = bounds[:, 0 : 2 * n - 1 : 2][:, :, None]
        b = bounds[:, 1 : 2 * n : 2][:, :, None]
        c = bounds[:, 2 : 2 * n + 1 : 2][:, :, None]
        d = bounds[:, 3 : 2 * n + 2 : 2][:, :, None]
        return trapezoid_grid(xs[None, None, :], a, b, c, d)

    def crisp_outputs(self, positions: np.ndarray):
        """Crisp win rate and fired flag for every (particle, record) pair."""
        p = positions.shape[0]
        m = self.y.size
        degrees = [
            self._var_memberships(positions, var_index, self.features[j])
            for j, var_index in enumerate(self.input_indices)
        ]
        pad = np.empty((p, 2, m))
        pad[:, 0, :] = 1.0
        pad[:, 1, :] = 0.0
        deg_ext = np.concatenate(degrees + [pad], axis=1)
        act = deg_ext[:, self.idx_min, :].min(axis=2)
        if not self.all_and:
            act_or = deg_ext[:, self.idx_max, :].max(axis=2)
            act = np.where(self.is_and[None, :, None], act, act_or)
        act = act * self.weights[None, :, None]
        term_act = np.zeros((p, len(self.rules_by_term), m))
        for t_i, rule_ix in enumerate(self.rules_by_term):
            if rule_ix.size:
                term_act[:, t_i, :] = act[:, rule_ix, :].max(axis=1)
        mf_out = self._var_memberships(positions, self.out_index, np.asarray(self.xs))
        agg = np.max(
            np.minimum(term_act[:, :, :, None], mf_out[:, :, None, :]), axis=1
        )
        den = np.sum(agg, axis=-1)
        num = np.sum(agg * self.xs, axis=-1)
        fired = den > 0.0
        crisp = num / np.where(fired, den, 1.0)
        return crisp, fired

    def _evaluate_block(self, positions: np.ndarray) -> np.ndarray:
        crisp, fired = self.crisp_outputs(positions)
        squared = np.where(fired, (crisp - self.y[None, :]) ** 2, 1.0)
        return squared.mean(axis=1)

    def evaluate(self, positions: np.ndarray, threads: int = 1) -> np.ndarray:
        """Fitness of a (particles, dimension) batch.  Results are identical
        for any thread count; particles are pure, independent evaluations."""
        positions = np.asarray(positions, dtype=float)
        count = positions.shape[0]
        if threads > 1 and count > 1:
            chunks = np.array_split(np.arange(count), min(threads, count))
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                parts = list(
                    pool.map(lambda ix: self._evaluate_block(positions[ix]), chunks)
                )
            return np.concatenate(parts)
        return self._evaluate_block(positions)


def fitness(position, template: FuzzyController, records) -> float:
    """Mean squared error between inferred and desired win rates.

    ``(1/M) * sum((x_i - y_i)^2)`` where ``x_i`` is the crisp output of the
    decoded controller on record i and ``y_i`` the record's desired output;
    records for which no rule fires contribute the worst-case squared error
    of 1.0.
    """
    position = np.asarray(position, dtype=float)
    encoding = ParameterEncoding.from_controller(template)
    _check_feasible(position, encoding)
    return float(_Evaluator(template, records).evaluate(position[None, :])[0])


@dataclass
class SwarmConfig:
    particle_count: int = 20
    inertia_weight: float = 0.0
    cognitive: float = 2.0
    social: float = 2.0
    generations: int = 3000
    seed: int = 0
    velocity_clamp_fraction: float = 0.2

    def __post_init__(self):
        if self.particle_count < 1:
            raise ValueError("particle_count must be at least 1")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        if not 0.0 < self.velocity_clamp_fraction <= 1.0:
            raise ValueError("velocity_clamp_fraction must be in (0, 1]")


@dataclass(frozen=True)
class Particle:
    """Read-only view of one particle's state."""

    position: np.ndarray
    velocity: np.ndarray
    personal_best: np.ndarray
    personal_best_fitness: float


class Swarm:
    """Mutable swarm state; advance it with :func:`swarm_step`.

    Particle 0 starts at the template's own encoding, so the global best can
    only improve on the before-learning controller; the remaining particles
    start at repaired uniform-random positions with zero velocity.
    """

    def __init__(self, template, records, config: SwarmConfig, threads: int = 1):
        self.template = template
        self.config = config
        self.threads = max(1, threads)
        self.encoding = ParameterEncoding.from_controller(template)
        self.evaluator = _Evaluator(template, records)
        self.rng = np.random.default_rng(config.seed)
        lower, upper = self.encoding.lower_bounds(), self.encoding.upper_bounds()
        self.vmax = config.velocity_clamp_fraction * (upper - lower)
        count, dim = config.particle_count, self.encoding.dimension
        positions = np.empty((count, dim))
        positions[0] = encode_parameters(template)
        if count > 1:
            positions[1:] = self.encoding.repair_matrix(
                self.rng.uniform(lower, upper, size=(count - 1, dim))
            )
        self.positions = positions
        self.velocities = np.zeros((count, dim))
        fits = self.evaluator.evaluate(positions, self.threads)
        self.pbest_positions = positions.copy()
        self.pbest_fitness = fits.copy()
        best = int(np.argmin(fits))
        self.gbest_position = positions[best].copy()
        self.gbest_fitness = float(fits[best])
        self.initial_fitness = float(fits[0])  # the template particle
        self.generation = 0
        self.history = [self.gbest_fitness]

    def particles(self) -> tuple[Particle, ...]:
        return tuple(
            Particle(
                position=self.positions[i].copy(),
                velocity=self.velocities[i].copy(),
                personal_best=self.pbest_positions[i].copy(),
                personal_best_fitness=float(self.pbest_fitness[i]),
            )
            for i in range(self.positions.shape[0])
        )


def init_swarm(template, records, config: SwarmConfig, threads: int = 1) -> Swarm:
    return Swarm(template, records, config, threads)


def swarm_step(swarm: Swarm) -> Swarm:
    """Advance the swarm one generation in place (and return it).

    Per particle: fresh uniform attraction draws for every dimension, a
    velocity update clamped per dimension to the configured fraction of the
    group range, a repaired position update, and a strict-improvement
    personal/global best update.  The global best never worsens; ties keep
    the incumbent.
    """
    cfg = swarm.config
    count, dim = swarm.positions.shape
    draws = swarm.rng.uniform(size=(count, 2, dim))
    velocity = (
        cfg.inertia_weight * swarm.velocities
        + cfg.cognitive * draws[:, 0, :] * (swarm.pbest_positions - swarm.positions)
        + cfg.social * draws[:, 1, :] * (swarm.gbest_position[None, :] - swarm.positions)
    )
    np.clip(velocity, -swarm.vmax, swarm.vmax, out=velocity)
    swarm.velocities = velocity
    swarm.positions = swarm.encoding.repair_matrix(swarm.positions + velocity)
    fits = swarm.evaluator.evaluate(swarm.positions, swarm.threads)
    improved = fits < swarm.pbest_fitness
    swarm.pbest_positions[improved] = swarm.positions[improved]
    swarm.pbest_fitness[improved] = fits[improved]
    best = int(np.argmin(swarm.pbest_fitness))
    if swarm.pbest_fitness[best] < swarm.gbest_fitness:
        swarm.gbest_fitness = float(swarm.pbest_fitness[best])
        swarm.gbest_position = swarm.pbest_positions[best].copy()
    swarm.generation += 1
    swarm.history.append(swarm.gbest_fitness)
    return swarm


@dataclass
class LearnResult:
    learned_controller: FuzzyController
    history: list[float] = field(repr=False)
    initial_fitness: float = 0.0
    final_fitness: float = 0.0


def learn(
    template: FuzzyController,
    records,
    config: SwarmConfig | None = None,
    threads: int = 1,
    progress=None,
) -> LearnResult:
    """Tune the template's fuzzy-set parameters against the records.

    Runs ``config.generations`` swarm steps and decodes the global best into
    the learned controller.  ``initial_fitness`` is the template's own
    fitness (the before-learning controller), so ``final_fitness`` can never
    exceed it.  ``history`` holds the global-best fitness after every
    generation, including generation 0, and is nonincreasing.  Identical
    arguments (seed included) reproduce bitwise-identical results.

    ``progress``, if given, is called as ``progress(generation, gbest)``
    after initialization and after every step.
    """
    if config is None:
        config = SwarmConfig()
    swarm = init_swarm(template, records, config, threads)
    if progress is not None:
        progress(0, swarm.gbest_fitness)
    for _ in range(config.generations):
        swarm_step(swarm)
        if progress is not None:
            progress(swarm.generation, swarm.gbest_fitness)
    return LearnResult(
        learned_controller=decode_parameters(swarm.gbest_position, template),
        history=list(swarm.history),
        initial_fitness=swarm.initial_fitness,
        final_fitness=float(swarm.gbest_fitness),
    )
