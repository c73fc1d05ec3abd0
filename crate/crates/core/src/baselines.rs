//! Chromosome-based baselines: random search, MOSA and FITEST.
//!
//! A chromosome is an open-loop action sequence of the environment's episode
//! length. Genes past the end of an episode are never executed.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::EnvAction;
use crate::archive::{Archive, ObjectiveId};
use crate::budget::Budget;
use crate::env::Environment;
use crate::error::{contract, Result};
use crate::rl::pick_index;
use crate::scalar::{Scalar, SENTINEL};
use crate::testcase::TestCase;
use crate::trace::RunObserver;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<EnvAction>,
}

impl Chromosome {
    pub fn random<R: Rng + ?Sized>(len: usize, actions: &[EnvAction], rng: &mut R) -> Self {
        Self { genes: (0..len).map(|_| actions[pick_index(actions.len(), rng)]).collect() }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

/// Maximum reward per objective over the executed steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessVector(pub Vec<f64>);

impl FitnessVector {
    pub fn covers(&self, o: ObjectiveId) -> bool {
        self.0.get(o.index()) == Some(&SENTINEL)
    }

    /// True when `self` is at least as good everywhere on `objectives` and
    /// strictly better somewhere (larger is better).
    pub fn dominates(&self, other: &FitnessVector, objectives: &[ObjectiveId]) -> bool {
        let mut strictly = false;
        for o in objectives {
            let (a, b) = (self.0[o.index()], other.0[o.index()]);
            if a < b {
                return false;
            }
            strictly |= a > b;
        }
        strictly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    /// `None` means one individual per objective.
    pub population_size: Option<usize>,
    pub crossover_rate: f64,
    /// Per-gene resampling probability; `None` means `1 / j_max`.
    pub mutation_rate: Option<f64>,
    /// Smallest FITEST population.
    pub min_population: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { population_size: None, crossover_rate: 0.75, mutation_rate: None, min_population: 2 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == Some(0) {
            return Err(contract("population_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(contract("crossover_rate outside [0, 1]"));
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return Err(contract("mutation_rate outside [0, 1]"));
            }
        }
        if self.min_population == 0 {
            return Err(contract("min_population must be at least 1"));
        }
        Ok(())
    }

    fn population_for(&self, n: usize) -> usize {
        self.population_size.unwrap_or(n).max(1)
    }

    fn mutation_for(&self, j_max: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / j_max.max(1) as f64)
    }
}

/// Result of executing one chromosome.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub fitness: FitnessVector,
    /// Executed prefix with the observed states.
    pub test_case: TestCase,
    pub steps_used: usize,
    /// Length of the prefix ending at the first violating step, per objective.
    pub first_violation: Vec<Option<usize>>,
}

impl Evaluation {
    /// Offers the violating prefixes to `archive`.
    pub fn offer_to(&self, archive: &mut Archive) {
        for (i, k) in self.first_violation.iter().enumerate() {
            if let Some(k) = *k {
                archive.offer_with(ObjectiveId(i), k, || self.test_case.prefix(k));
            }
        }
    }
}

/// Executes `chrom` from a fresh reset until the episode ends, the genes run
/// out, or the budget is spent.
pub fn evaluate<T, E>(chrom: &Chromosome, env: &mut E, budget: &mut Budget) -> Result<Evaluation>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
{
    let n = env.n_objectives();
    let mut fitness = vec![0.0f64; n];
    let mut first_violation = vec![None; n];
    let mut s = env.reset();
    let mut t = TestCase::new(env.env_id(), env.seed());
    for &gene in &chrom.genes {
        if budget.exhausted() {
            break;
        }
        let out = env.perform(gene)?;
        budget.charge()?;
        t.push(s, gene);
        for (i, r) in out.rewards.values().iter().enumerate() {
            let r = r.as_f64();
            if r > fitness[i] {
                fitness[i] = r;
            }
            if r == SENTINEL && first_violation[i].is_none() {
                first_violation[i] = Some(t.len());
            }
        }
        if out.terminal {
            break;
        }
        s = env.observe();
    }
    let steps_used = t.len();
    Ok(Evaluation { fitness: FitnessVector(fitness), test_case: t, steps_used, first_violation })
}

/// Uniformly random chromosomes until the budget is spent.
pub fn random_search<T, E, R, O>(env: &mut E, budget: &mut Budget, rng: &mut R, observer: &mut O) -> Result<Archive>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    let actions = env.actions().to_vec();
    let j_max = env.j_max();
    let mut archive = Archive::new();
    while !budget.exhausted() {
        let chrom = Chromosome::random(j_max, &actions, rng);
        let ev = evaluate(&chrom, env, budget)?;
        ev.offer_to(&mut archive);
        observer.on_progress(budget.consumed(), &archive);
    }
    Ok(archive)
}

/// Fast non-dominated sorting of `points` on `objectives`, larger is better.
/// Fronts list indices in increasing order.
pub fn non_dominated_sort(points: &[&FitnessVector], objectives: &[ObjectiveId]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if points[i].dominates(points[j], objectives) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if points[j].dominates(points[i], objectives) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of a front; boundary points get infinity.
pub fn crowding_distance(points: &[&FitnessVector], objectives: &[ObjectiveId]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0f64; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for o in objectives {
        let k = o.index();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| points[a].0[k].total_cmp(&points[b].0[k]).then(a.cmp(&b)));
        let lo = points[order[0]].0[k];
        let hi = points[order[n - 1]].0[k];
        d[order[0]] = f64::INFINITY;
        d[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n - 1 {
                let gap = points[order[w + 1]].0[k] - points[order[w - 1]].0[k];
                d[order[w]] += gap / (hi - lo);
            }
        }
    }
    d
}

/// MOSA preference sorting. Front 0 holds, for each uncovered objective, the
/// individual with the highest fitness on it (ties to the shorter executed
/// length, then the lower index). The rest is sorted by non-dominance on the
/// uncovered objectives, or on all objectives once everything is covered.
pub fn preference_sort(fitness: &[&FitnessVector], lengths: &[usize], uncovered: &[ObjectiveId], n: usize) -> Vec<Vec<usize>> {
    let mut fronts = Vec::new();
    let mut in_f0 = vec![false; fitness.len()];
    for o in uncovered {
        let best = (0..fitness.len()).min_by(|&a, &b| {
            fitness[b].0[o.index()]
                .total_cmp(&fitness[a].0[o.index()])
                .then(lengths[a].cmp(&lengths[b]))
                .then(a.cmp(&b))
        });
        if let Some(b) = best {
            in_f0[b] = true;
        }
    }
    let f0: Vec<usize> = (0..fitness.len()).filter(|&i| in_f0[i]).collect();
    if !f0.is_empty() {
        fronts.push(f0);
    }
    let all: Vec<ObjectiveId> = ObjectiveId::all(n).collect();
    let objectives = if uncovered.is_empty() { &all[..] } else { uncovered };
    let rest: Vec<usize> = (0..fitness.len()).filter(|&i| !in_f0[i]).collect();
    let pts: Vec<&FitnessVector> = rest.iter().map(|&i| fitness[i]).collect();
    for f in non_dominated_sort(&pts, objectives) {
        fronts.push(f.into_iter().map(|j| rest[j]).collect());
    }
    fronts
}

/// One line of the per-generation log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// 0 is the initial population.
    pub generation: u64,
    pub evaluations: u64,
    pub consumed_steps: u64,
    pub covered: usize,
    pub population_size: usize,
    /// Best fitness per objective in the population after selection.
    pub best_fitness: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchOutcome {
    pub archive: Archive,
    pub generations: Vec<GenerationRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Mosa,
    Fitest,
}

struct Individual {
    chrom: Chromosome,
    eval: Evaluation,
    rank: usize,
    crowding: f64,
}

pub fn mosa_search<T, E, R, O>(
    env: &mut E,
    budget: &mut Budget,
    params: &SearchParams,
    rng: &mut R,
    observer: &mut O,
) -> Result<SearchOutcome>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    evolve(Variant::Mosa, env, budget, params, rng, observer)
}

/// MOSA whose population shrinks to `max(min_population, |uncovered|)` at
/// every generation boundary, the initial one included.
pub fn fitest_search<T, E, R, O>(
    env: &mut E,
    budget: &mut Budget,
    params: &SearchParams,
    rng: &mut R,
    observer: &mut O,
) -> Result<SearchOutcome>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    evolve(Variant::Fitest, env, budget, params, rng, observer)
}

fn evolve<T, E, R, O>(
    variant: Variant,
    env: &mut E,
    budget: &mut Budget,
    params: &SearchParams,
    rng: &mut R,
    observer: &mut O,
) -> Result<SearchOutcome>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    params.validate()?;
    let n = env.n_objectives();
    let j_max = env.j_max();
    let actions = env.actions().to_vec();
    let mutation = params.mutation_for(j_max);
    let mut out = SearchOutcome::default();
    let mut evaluations = 0u64;
    let mut pop_size = params.population_for(n);

    let mut pop: Vec<Individual> = Vec::with_capacity(pop_size);
    while pop.len() < pop_size && !budget.exhausted() {
        let chrom = Chromosome::random(j_max, &actions, rng);
        let eval = evaluate(&chrom, env, budget)?;
        evaluations += 1;
        eval.offer_to(&mut out.archive);
        observer.on_progress(budget.consumed(), &out.archive);
        pop.push(Individual { chrom, eval, rank: 0, crowding: 0.0 });
    }
    if variant == Variant::Fitest {
        pop_size = params.min_population.max(n - out.archive.len());
    }
    select(&mut pop, pop_size, &out.archive, n);
    out.generations.push(record(0, evaluations, budget, &out.archive, &pop, n));

    let mut generation = 0u64;
    while !budget.exhausted() && !pop.is_empty() {
        generation += 1;
        let mut offspring: Vec<Individual> = Vec::with_capacity(pop_size);
        while offspring.len() < pop_size && !budget.exhausted() {
            let p1 = tournament(&pop, rng);
            let p2 = tournament(&pop, rng);
            let (mut c1, mut c2) = (pop[p1].chrom.clone(), pop[p2].chrom.clone());
            if rng.gen::<f64>() < params.crossover_rate {
                crossover(&mut c1, &mut c2, rng);
            }
            for mut child in [c1, c2] {
                if offspring.len() >= pop_size || budget.exhausted() {
                    break;
                }
                mutate(&mut child, &actions, mutation, rng);
                let eval = evaluate(&child, env, budget)?;
                evaluations += 1;
                eval.offer_to(&mut out.archive);
                observer.on_progress(budget.consumed(), &out.archive);
                offspring.push(Individual { chrom: child, eval, rank: 0, crowding: 0.0 });
            }
        }
        pop.extend(offspring);
        if variant == Variant::Fitest {
            let uncovered = n - out.archive.len();
            pop_size = params.min_population.max(uncovered);
        }
        select(&mut pop, pop_size, &out.archive, n);
        out.generations.push(record(generation, evaluations, budget, &out.archive, &pop, n));
    }
    Ok(out)
}

fn record(generation: u64, evaluations: u64, budget: &Budget, archive: &Archive, pop: &[Individual], n: usize) -> GenerationRecord {
    let best_fitness =
        (0..n).map(|i| pop.iter().map(|p| p.eval.fitness.0[i]).fold(0.0, f64::max)).collect();
    GenerationRecord {
        generation,
        evaluations,
        consumed_steps: budget.consumed(),
        covered: archive.len(),
        population_size: pop.len(),
        best_fitness,
    }
}

/// Keeps the best `size` individuals by preference rank, then crowding, and
/// stores both on the survivors.
fn select(pop: &mut Vec<Individual>, size: usize, archive: &Archive, n: usize) {
    let uncovered: Vec<ObjectiveId> = ObjectiveId::all(n).filter(|o| !archive.covers(*o)).collect();
    let all: Vec<ObjectiveId> = ObjectiveId::all(n).collect();
    let crowd_on = if uncovered.is_empty() { &all[..] } else { &uncovered[..] };
    let fitness: Vec<&FitnessVector> = pop.iter().map(|p| &p.eval.fitness).collect();
    let lengths: Vec<usize> = pop.iter().map(|p| p.eval.steps_used).collect();
    let fronts = preference_sort(&fitness, &lengths, &uncovered, n);
    let mut keep: Vec<(usize, usize, f64)> = Vec::with_capacity(pop.len());
    for (rank, front) in fronts.iter().enumerate() {
        let pts: Vec<&FitnessVector> = front.iter().map(|&i| fitness[i]).collect();
        let cd = crowding_distance(&pts, crowd_on);
        let mut members: Vec<(usize, usize, f64)> = front.iter().zip(cd).map(|(&i, c)| (i, rank, c)).collect();
        if keep.len() + members.len() > size {
            members.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
            members.truncate(size - keep.len());
        }
        keep.extend(members);
        if keep.len() >= size {
            break;
        }
    }
    keep.sort_by_key(|k| k.0);
    let mut slots: Vec<Option<Individual>> = pop.drain(..).map(Some).collect();
    for (i, rank, crowding) in keep {
        let mut ind = slots[i].take().expect("each survivor is selected once");
        ind.rank = rank;
        ind.crowding = crowding;
        pop.push(ind);
    }
}

fn tournament<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    let a = pick_index(pop.len(), rng);
    let b = pick_index(pop.len(), rng);
    let (x, y) = (&pop[a], &pop[b]);
    match x.rank.cmp(&y.rank).then_with(|| y.crowding.partial_cmp(&x.crowding).unwrap_or(Ordering::Equal)) {
        Ordering::Greater => b,
        _ => a,
    }
}

/// Single-point crossover; the cut lies strictly inside the chromosome.
fn crossover<R: Rng + ?Sized>(a: &mut Chromosome, b: &mut Chromosome, rng: &mut R) {
    let len = a.len().min(b.len());
    if len < 2 {
        return;
    }
    let cut = rng.gen_range(1..len);
    for i in cut..len {
        std::mem::swap(&mut a.genes[i], &mut b.genes[i]);
    }
}

fn mutate<R: Rng + ?Sized>(c: &mut Chromosome, actions: &[EnvAction], rate: f64, rng: &mut R) {
    for g in c.genes.iter_mut() {
        if rng.gen::<f64>() < rate {
            *g = actions[pick_index(actions.len(), rng)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ChainMdp, ScriptStep, ScriptedEnv};
    use crate::trace::Silent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn fv(v: &[f64]) -> FitnessVector {
        FitnessVector(v.to_vec())
    }

    #[test]
    fn preference_front_holds_each_objective_best() {
        let pts = [fv(&[1.0, 9.0]), fv(&[9.0, 1.0]), fv(&[5.0, 5.0])];
        let refs: Vec<&FitnessVector> = pts.iter().collect();
        let fronts = preference_sort(&refs, &[3, 3, 3], &ObjectiveId::all(2).collect::<Vec<_>>(), 2);
        assert_eq!(fronts[0], vec![0, 1]);
        assert_eq!(fronts[1], vec![2]);
    }

    #[test]
    fn sentinel_ties_prefer_shorter_runs() {
        let pts = [fv(&[SENTINEL]), fv(&[SENTINEL]), fv(&[2.0])];
        let refs: Vec<&FitnessVector> = pts.iter().collect();
        let fronts = preference_sort(&refs, &[30, 12, 5], &[ObjectiveId(0)], 1);
        assert_eq!(fronts[0], vec![1]);
    }

    #[test]
    fn fully_covered_sorting_uses_every_objective() {
        let pts = [fv(&[1.0, 1.0]), fv(&[2.0, 2.0]), fv(&[3.0, 0.0])];
        let refs: Vec<&FitnessVector> = pts.iter().collect();
        let fronts = preference_sort(&refs, &[1, 1, 1], &[], 2);
        assert_eq!(fronts, vec![vec![1, 2], vec![0]]);
    }

    #[test]
    fn crowding_marks_boundaries_infinite() {
        let pts = [fv(&[0.0, 4.0]), fv(&[1.0, 3.0]), fv(&[4.0, 0.0])];
        let refs: Vec<&FitnessVector> = pts.iter().collect();
        let d = crowding_distance(&refs, &ObjectiveId::all(2).collect::<Vec<_>>());
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evaluation_stops_at_terminal() {
        let mut env = ChainMdp::new(5, 0);
        let chrom = Chromosome { genes: vec![EnvAction::ThrottleUp; 50] };
        let mut b = Budget::new(1000);
        let ev = evaluate::<f64, _>(&chrom, &mut env, &mut b).unwrap();
        assert_eq!(ev.steps_used, 5);
        assert_eq!(ev.test_case.len(), 5);
        assert_eq!(b.consumed(), 5);
        assert_eq!(ev.first_violation, vec![Some(5)]);
        assert!(ev.fitness.covers(ObjectiveId(0)));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut env = ChainMdp::new(5, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chrom = Chromosome::random(50, &[EnvAction::ThrottleUp, EnvAction::NoOp], &mut rng);
        let a = evaluate::<f64, _>(&chrom, &mut env, &mut Budget::new(100)).unwrap();
        let b = evaluate::<f64, _>(&chrom, &mut env, &mut Budget::new(100)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_search_with_no_budget_is_empty() {
        let mut env = ChainMdp::new(5, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_search::<f64, _, _, _>(&mut env, &mut Budget::new(0), &mut rng, &mut Silent).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn searches_spend_exactly_the_budget() {
        let script = Arc::new(|h: &[EnvAction]| ScriptStep { rewards: vec![h.len() as f64, 1.0], terminal: h.len() == 7 });
        for variant in [Variant::Mosa, Variant::Fitest] {
            let mut env = ScriptedEnv::new("toy", 2, 10, script.clone());
            let mut b = Budget::new(1001);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let out = evolve::<f64, _, _, _>(variant, &mut env, &mut b, &SearchParams::default(), &mut rng, &mut Silent).unwrap();
            assert_eq!(b.consumed(), 1001);
            assert!(out.generations.iter().all(|g| g.population_size == 2));
        }
    }
}
