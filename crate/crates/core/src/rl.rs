//! Tabular Q-learning and the single-objective test generation loop.

use std::collections::hash_map::Entry;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::action::{EnvAction, ACTION_COUNT};
use crate::archive::ObjectiveId;
use crate::budget::Budget;
use crate::env::Environment;
use crate::error::{contract, Result};
use crate::scalar::Scalar;
use crate::state::DiscretizedState;
use crate::testcase::TestCase;
use crate::trace::{RunObserver, TraceRecord};

/// Expected-return estimates per (state, action). Unseen entries read as
/// `default_value`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    table: FxHashMap<DiscretizedState, [T; ACTION_COUNT]>,
    default_value: T,
}

impl<T: Scalar> Default for QTable<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> QTable<T> {
    pub fn new() -> Self {
        Self { table: FxHashMap::default(), default_value: T::zero() }
    }

    pub fn default_value(&self) -> T {
        self.default_value
    }

    /// Number of materialized states.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, s: &DiscretizedState, a: EnvAction) -> T {
        self.table.get(s).map_or(self.default_value, |row| row[a.index()])
    }

    pub fn row(&self, s: &DiscretizedState) -> Option<&[T; ACTION_COUNT]> {
        self.table.get(s)
    }

    /// Stores a value, rejecting non-finite input.
    pub fn set(&mut self, s: DiscretizedState, a: EnvAction, value: T) -> Result<()> {
        if !value.is_finite() {
            return Err(contract(format!("Q-value {value} is not finite")));
        }
        self.row_mut(s)[a.index()] = value;
        Ok(())
    }

    fn row_mut(&mut self, s: DiscretizedState) -> &mut [T; ACTION_COUNT] {
        let d = self.default_value;
        match self.table.entry(s) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert([d; ACTION_COUNT]),
        }
    }

    /// Largest value over `actions` in state `s`.
    pub fn max_value(&self, s: &DiscretizedState, actions: &[EnvAction]) -> T {
        match self.table.get(s) {
            None => self.default_value,
            Some(row) => actions.iter().map(|a| row[a.index()]).fold(T::neg_infinity(), T::max),
        }
    }

    /// Actions in `actions` attaining the maximum value, in canonical order.
    pub fn greedy_actions(&self, s: &DiscretizedState, actions: &[EnvAction]) -> Vec<EnvAction> {
        match self.table.get(s) {
            None => actions.to_vec(),
            Some(row) => {
                let best = actions.iter().map(|a| row[a.index()]).fold(T::neg_infinity(), T::max);
                actions.iter().copied().filter(|a| row[a.index()] == best).collect()
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DiscretizedState, &[T; ACTION_COUNT])> {
        self.table.iter()
    }

    /// State-sorted snapshot for serialization.
    pub fn snapshot(&self) -> QTableSnapshot<T> {
        let mut entries: Vec<QTableEntry<T>> =
            self.table.iter().map(|(s, row)| QTableEntry { state: *s, values: row.to_vec() }).collect();
        entries.sort_by_key(|a| a.state);
        QTableSnapshot { actions: EnvAction::ALL.iter().map(|a| a.name().to_string()).collect(), default_value: self.default_value, entries }
    }

    pub fn from_snapshot(snap: &QTableSnapshot<T>) -> Result<Self> {
        let expected: Vec<String> = EnvAction::ALL.iter().map(|a| a.name().to_string()).collect();
        if snap.actions != expected {
            return Err(contract("Q-table snapshot uses a different action order"));
        }
        let mut q = Self { table: FxHashMap::default(), default_value: snap.default_value };
        for e in &snap.entries {
            let row: [T; ACTION_COUNT] = e
                .values
                .clone()
                .try_into()
                .map_err(|_| contract(format!("Q-table row has {} values, expected {ACTION_COUNT}", e.values.len())))?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(contract("Q-table snapshot contains a non-finite value"));
            }
            q.table.insert(e.state, row);
        }
        Ok(q)
    }
}

/// JSON form of a Q-table: one row of per-action values per visited state,
/// columns in `actions` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QTableSnapshot<T> {
    pub actions: Vec<String>,
    pub default_value: T,
    pub entries: Vec<QTableEntry<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QTableEntry<T> {
    pub state: DiscretizedState,
    pub values: Vec<T>,
}

/// Learning rate, discount and exploration schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct LearnParams<T> {
    pub alpha: T,
    pub gamma: T,
    pub eps_start: T,
    pub eps_end: T,
    /// Fraction of the budget over which epsilon decays linearly.
    pub eps_decay_fraction: T,
}

impl<T: Scalar> Default for LearnParams<T> {
    fn default() -> Self {
        Self { alpha: T::of(0.01), gamma: T::of(0.9), eps_start: T::one(), eps_end: T::of(0.1), eps_decay_fraction: T::of(0.2) }
    }
}

impl<T: Scalar> LearnParams<T> {
    pub fn validate(&self) -> Result<()> {
        let (z, o) = (T::zero(), T::one());
        if !(self.alpha > z && self.alpha <= o) {
            return Err(contract(format!("alpha = {} outside (0, 1]", self.alpha)));
        }
        if !(self.gamma >= z && self.gamma < o) {
            return Err(contract(format!("gamma = {} outside [0, 1)", self.gamma)));
        }
        if !(self.eps_start >= self.eps_end && self.eps_end >= z && self.eps_start <= o) {
            return Err(contract("epsilon schedule needs 1 >= eps_start >= eps_end >= 0"));
        }
        if !(self.eps_decay_fraction > z && self.eps_decay_fraction <= o) {
            return Err(contract("eps_decay_fraction outside (0, 1]"));
        }
        Ok(())
    }
}

/// Watkins update of the single entry `(s, a)`. Terminal transitions do not
/// bootstrap from `s_next`.
#[allow(clippy::too_many_arguments)]
pub fn q_update<T: Scalar>(
    q: &mut QTable<T>,
    s: &DiscretizedState,
    a: EnvAction,
    w: T,
    s_next: &DiscretizedState,
    terminal: bool,
    actions: &[EnvAction],
    params: &LearnParams<T>,
) -> Result<()> {
    if !w.is_finite() || w < T::zero() {
        return Err(contract(format!("reward {w} must be finite and non-negative")));
    }
    let future = if terminal { T::zero() } else { q.max_value(s_next, actions) };
    let old = q.get(s, a);
    let new = old + params.alpha * (w + params.gamma * future - old);
    q.set(*s, a, new)
}

/// Epsilon after `consumed` steps: linear from `eps_start` to `eps_end` over
/// the first `eps_decay_fraction` of the budget, constant afterwards.
pub fn epsilon_at<T: Scalar>(consumed: u64, total_steps: u64, params: &LearnParams<T>) -> Result<T> {
    if total_steps == 0 {
        return Err(contract("epsilon schedule over an empty budget"));
    }
    if consumed > total_steps {
        return Err(contract(format!("consumed {consumed} exceeds budget {total_steps}")));
    }
    let horizon = params.eps_decay_fraction * T::of(total_steps as f64);
    let progress = T::of(consumed as f64) / horizon;
    if progress >= T::one() {
        return Ok(params.eps_end);
    }
    Ok(params.eps_start + (params.eps_end - params.eps_start) * progress)
}

/// Uniform index in `0..n`; consumes randomness only when there is a choice.
pub(crate) fn pick_index<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    if n <= 1 {
        0
    } else {
        rng.gen_range(0..n)
    }
}

/// Epsilon-greedy selection among `actions`. Returns the action and whether
/// it came from the greedy branch. Greedy ties are broken uniformly.
pub fn choose_action<T: Scalar, R: Rng + ?Sized>(
    q: &QTable<T>,
    s: &DiscretizedState,
    actions: &[EnvAction],
    epsilon: T,
    rng: &mut R,
) -> (EnvAction, bool) {
    debug_assert!(!actions.is_empty());
    if rng.gen::<f64>() < epsilon.as_f64() {
        return (actions[pick_index(actions.len(), rng)], false);
    }
    let best = q.greedy_actions(s, actions);
    (best[pick_index(best.len(), rng)], true)
}

/// How the exploration rate evolves during a learning run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exploration<T> {
    /// Decay according to the learning parameters over the run's budget.
    Scheduled,
    Fixed(T),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainStats {
    pub episodes: u64,
    pub violations: u64,
}

/// Algorithm-1 style generation: runs episodes until a test case violates
/// `objective` (returned, ending at its first violating step) or the budget
/// runs out (`None`). `q` keeps every update either way.
#[allow(clippy::too_many_arguments)]
pub fn run_single_objective<T, E, R, O>(
    objective: ObjectiveId,
    env: &mut E,
    q: &mut QTable<T>,
    budget: &mut Budget,
    params: &LearnParams<T>,
    rng: &mut R,
    observer: &mut O,
) -> Result<Option<TestCase>>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    let mut stats = TrainStats::default();
    learn(objective, env, q, budget, params, Exploration::Scheduled, true, rng, observer, &mut stats)
}

/// Q-learning without the early return: keeps running episodes until the
/// budget is spent.
#[allow(clippy::too_many_arguments)]
pub fn train<T, E, R, O>(
    objective: ObjectiveId,
    env: &mut E,
    q: &mut QTable<T>,
    budget: &mut Budget,
    params: &LearnParams<T>,
    exploration: Exploration<T>,
    rng: &mut R,
    observer: &mut O,
) -> Result<TrainStats>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    let mut stats = TrainStats::default();
    learn(objective, env, q, budget, params, exploration, false, rng, observer, &mut stats)?;
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn learn<T, E, R, O>(
    objective: ObjectiveId,
    env: &mut E,
    q: &mut QTable<T>,
    budget: &mut Budget,
    params: &LearnParams<T>,
    exploration: Exploration<T>,
    stop_on_violation: bool,
    rng: &mut R,
    observer: &mut O,
    stats: &mut TrainStats,
) -> Result<Option<TestCase>>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    params.validate()?;
    if objective.index() >= env.n_objectives() {
        return Err(contract(format!("objective {objective} not offered by {}", env.env_id())));
    }
    let actions = env.actions().to_vec();
    while !budget.exhausted() {
        stats.episodes += 1;
        let mut s = env.reset();
        let mut t = TestCase::new(env.env_id(), env.seed());
        loop {
            if budget.exhausted() {
                return Ok(None);
            }
            let eps = match exploration {
                Exploration::Scheduled => epsilon_at(budget.consumed(), budget.total(), params)?,
                Exploration::Fixed(e) => e,
            };
            let (a, greedy) = choose_action(q, &s, &actions, eps, rng);
            let out = env.perform(a)?;
            budget.charge()?;
            t.push(s, a);
            let s_next = env.observe();
            let w = out.rewards.get(objective).ok_or_else(|| contract("environment returned too few rewards"))?;
            q_update(q, &s, a, w, &s_next, out.terminal, &actions, params)?;
            if observer.wants_trace() {
                observer.on_trace(&TraceRecord {
                    step: budget.consumed(),
                    episode: stats.episodes,
                    guide: greedy.then_some(objective),
                    state: s,
                    action: a,
                    rewards: out.rewards.to_f64(),
                    raw_rewards: out.raw.as_ref().map(|r| r.to_f64()),
                    epsilon: eps.as_f64(),
                    terminal: out.terminal,
                });
            }
            if out.rewards.is_violation(objective) {
                stats.violations += 1;
                if stop_on_violation {
                    return Ok(Some(t));
                }
            }
            if out.terminal {
                break;
            }
            s = s_next;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ChainMdp;
    use crate::trace::Silent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(k: i16) -> DiscretizedState {
        let mut s = DiscretizedState::default();
        s.ev.vx = crate::state::Tenths(k);
        s
    }

    const ALL: &[EnvAction] = &EnvAction::ALL;

    #[test]
    fn update_from_zero() {
        let mut q = QTable::<f64>::new();
        q_update(&mut q, &st(0), EnvAction::NoOp, 1.0, &st(1), false, ALL, &LearnParams::default()).unwrap();
        assert!((q.get(&st(0), EnvAction::NoOp) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_reward_is_a_fixed_point() {
        let mut q = QTable::<f64>::new();
        q_update(&mut q, &st(0), EnvAction::NoOp, 0.0, &st(1), false, ALL, &LearnParams::default()).unwrap();
        assert_eq!(q.get(&st(0), EnvAction::NoOp), 0.0);
    }

    #[test]
    fn update_with_bootstrap() {
        let mut q = QTable::<f64>::new();
        q.set(st(0), EnvAction::FogUp, 1.0).unwrap();
        q.set(st(1), EnvAction::LightDown, 1.0).unwrap();
        q_update(&mut q, &st(0), EnvAction::FogUp, 1.0, &st(1), false, ALL, &LearnParams::default()).unwrap();
        assert!((q.get(&st(0), EnvAction::FogUp) - 1.009).abs() < 1e-12);
    }

    #[test]
    fn update_touches_one_entry() {
        let mut q = QTable::<f32>::new();
        q.set(st(1), EnvAction::NoOp, 2.0).unwrap();
        let before = q.clone();
        q_update(&mut q, &st(0), EnvAction::SteerUp, 3.0, &st(1), false, ALL, &LearnParams::default()).unwrap();
        let mut changed = 0;
        for (s, row) in q.iter() {
            for a in EnvAction::ALL {
                if row[a.index()] != before.get(s, a) {
                    changed += 1;
                }
            }
        }
        assert_eq!(changed, 1);
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn rejects_non_finite_reward() {
        let mut q = QTable::<f64>::new();
        let p = LearnParams::default();
        assert!(q_update(&mut q, &st(0), EnvAction::NoOp, f64::NAN, &st(1), false, ALL, &p).is_err());
        assert!(q_update(&mut q, &st(0), EnvAction::NoOp, f64::INFINITY, &st(1), false, ALL, &p).is_err());
        assert!(q.is_empty());
    }

    #[test]
    fn epsilon_schedule_points() {
        let p = LearnParams::<f64>::default();
        assert_eq!(epsilon_at(0, 100_000, &p).unwrap(), 1.0);
        assert!((epsilon_at(10_000, 100_000, &p).unwrap() - 0.55).abs() < 1e-12);
        assert_eq!(epsilon_at(20_000, 100_000, &p).unwrap(), 0.1);
        assert_eq!(epsilon_at(100_000, 100_000, &p).unwrap(), 0.1);
        assert!(epsilon_at(0, 0, &p).is_err());
        assert!(epsilon_at(5, 4, &p).is_err());
    }

    #[test]
    fn greedy_picks_unique_max() {
        let mut q = QTable::<f64>::new();
        q.set(st(0), EnvAction::ThrottleUp, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(choose_action(&q, &st(0), ALL, 0.0, &mut rng), (EnvAction::ThrottleUp, true));
        }
    }

    #[test]
    fn unseen_state_explores_every_action_greedily() {
        let q = QTable::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; ACTION_COUNT];
        let draws = 100_000;
        for _ in 0..draws {
            counts[choose_action(&q, &st(0), ALL, 0.0, &mut rng).0.index()] += 1;
        }
        let p = 1.0 / ACTION_COUNT as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sd + 1.0, "{counts:?}");
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let mut q = QTable::<f64>::new();
        q.set(st(3), EnvAction::FogDown, 0.25).unwrap();
        q.set(st(1), EnvAction::NoOp, 1.5).unwrap();
        let snap = q.snapshot();
        assert!(snap.entries[0].state < snap.entries[1].state);
        let text = serde_json::to_string(&snap).unwrap();
        let back = QTable::from_snapshot(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn zero_budget_leaves_q_untouched() {
        let mut env = ChainMdp::new(5, 0);
        let mut q = QTable::<f64>::new();
        let mut b = Budget::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = run_single_objective(ObjectiveId(0), &mut env, &mut q, &mut b, &LearnParams::default(), &mut rng, &mut Silent)
            .unwrap();
        assert!(r.is_none());
        assert!(q.is_empty());
    }

    #[test]
    fn unknown_objective_is_rejected() {
        let mut env = ChainMdp::new(5, 0);
        let mut q = QTable::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = run_single_objective(
            ObjectiveId(1),
            &mut env,
            &mut q,
            &mut Budget::new(10),
            &LearnParams::default(),
            &mut rng,
            &mut Silent,
        );
        assert!(r.is_err());
    }
}
