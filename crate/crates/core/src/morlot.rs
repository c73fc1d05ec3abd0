//! Many-objective Q-learning: one Q-table per objective, with the action at
//! each step picked by the table of the uncovered objective that earned the
//! highest reward on the previous step.

use std::collections::BTreeSet;

use rand::Rng;

use crate::action::EnvAction;
use crate::archive::{Archive, ObjectiveId};
use crate::budget::Budget;
use crate::env::Environment;
use crate::error::{contract, Error, Result};
use crate::reward::RewardVector;
use crate::rl::{epsilon_at, pick_index, q_update, LearnParams, QTable};
use crate::scalar::Scalar;
use crate::state::DiscretizedState;
use crate::testcase::TestCase;
use crate::trace::{RunObserver, TraceRecord};

/// Everything MORLOT carries between steps.
#[derive(Clone, Debug)]
pub struct MorlotState<T> {
    pub q_tables: Vec<QTable<T>>,
    pub uncovered: BTreeSet<ObjectiveId>,
    pub archive: Archive,
    /// Rewards of the previous action in the current episode.
    pub last_rewards: Option<RewardVector<T>>,
}

impl<T: Scalar> MorlotState<T> {
    /// Fresh tables, every objective uncovered.
    pub fn new(n: usize) -> Self {
        Self {
            q_tables: (0..n).map(|_| QTable::new()).collect(),
            uncovered: ObjectiveId::all(n).collect(),
            archive: Archive::new(),
            last_rewards: None,
        }
    }

    pub fn n_objectives(&self) -> usize {
        self.q_tables.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MorlotOptions {
    /// Offer violating prefixes for already covered objectives too, so the
    /// archive can pick up shorter witnesses.
    pub recheck_covered: bool,
}

impl Default for MorlotOptions {
    fn default() -> Self {
        Self { recheck_covered: true }
    }
}

/// Returns the chosen action and the objective whose table chose it (`None`
/// for a random move).
pub fn choose_action_multi_objs<T: Scalar, R: Rng + ?Sized>(
    s: &DiscretizedState,
    state: &MorlotState<T>,
    actions: &[EnvAction],
    epsilon: T,
    rng: &mut R,
) -> Result<(EnvAction, Option<ObjectiveId>)> {
    if state.uncovered.is_empty() {
        return Err(contract("no uncovered objective left to guide the search"));
    }
    if rng.gen::<f64>() < epsilon.as_f64() {
        return Ok((actions[pick_index(actions.len(), rng)], None));
    }
    let candidates: Vec<ObjectiveId> = match &state.last_rewards {
        None => state.uncovered.iter().copied().collect(),
        Some(w) => {
            let value = |o: ObjectiveId| w.get(o).unwrap_or_else(T::neg_infinity);
            let best = state.uncovered.iter().map(|&o| value(o)).fold(T::neg_infinity(), T::max);
            state.uncovered.iter().copied().filter(|&o| value(o) == best).collect()
        }
    };
    let guide = candidates[pick_index(candidates.len(), rng)];
    let best = state.q_tables[guide.index()].greedy_actions(s, actions);
    Ok((best[pick_index(best.len(), rng)], Some(guide)))
}

/// Updates every table, covered or not, with its own reward channel.
#[allow(clippy::too_many_arguments)]
pub fn update_q_tables<T: Scalar>(
    state: &mut MorlotState<T>,
    s: &DiscretizedState,
    a: EnvAction,
    w: &RewardVector<T>,
    s_next: &DiscretizedState,
    terminal: bool,
    actions: &[EnvAction],
    params: &LearnParams<T>,
) -> Result<()> {
    if w.len() != state.n_objectives() {
        return Err(Error::RewardLength { expected: state.n_objectives(), got: w.len() });
    }
    for (i, q) in state.q_tables.iter_mut().enumerate() {
        q_update(q, s, a, w[i], s_next, terminal, actions, params)?;
    }
    state.last_rewards = Some(w.clone());
    Ok(())
}

/// Runs episodes until the budget is spent or every objective is covered.
/// Results accumulate in `state`.
pub fn run_morlot<T, E, R, O>(
    env: &mut E,
    state: &mut MorlotState<T>,
    budget: &mut Budget,
    params: &LearnParams<T>,
    options: MorlotOptions,
    rng: &mut R,
    observer: &mut O,
) -> Result<()>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
    R: Rng + ?Sized,
    O: RunObserver + ?Sized,
{
    params.validate()?;
    let n = state.n_objectives();
    if n == 0 {
        return Err(contract("MORLOT needs at least one objective"));
    }
    if env.n_objectives() != n {
        return Err(Error::RewardLength { expected: n, got: env.n_objectives() });
    }
    if let Some(o) = state.uncovered.iter().find(|o| o.index() >= n) {
        return Err(contract(format!("uncovered objective {o} out of range")));
    }
    let actions = env.actions().to_vec();
    let mut episode = 0u64;
    while !budget.exhausted() && !state.uncovered.is_empty() {
        episode += 1;
        let mut s = env.reset();
        state.last_rewards = None;
        let mut t = TestCase::new(env.env_id(), env.seed());
        while !budget.exhausted() && !state.uncovered.is_empty() {
            let eps = epsilon_at(budget.consumed(), budget.total(), params)?;
            let (a, guide) = choose_action_multi_objs(&s, state, &actions, eps, rng)?;
            let out = env.perform(a)?;
            budget.charge()?;
            t.push(s, a);
            let s_next = env.observe();
            update_q_tables(state, &s, a, &out.rewards, &s_next, out.terminal, &actions, params)?;
            if observer.wants_trace() {
                observer.on_trace(&TraceRecord {
                    step: budget.consumed(),
                    episode,
                    guide,
                    state: s,
                    action: a,
                    rewards: out.rewards.to_f64(),
                    raw_rewards: out.raw.as_ref().map(|r| r.to_f64()),
                    epsilon: eps.as_f64(),
                    terminal: out.terminal,
                });
            }
            for o in out.rewards.violations() {
                if state.uncovered.remove(&o) || options.recheck_covered {
                    state.archive.offer_with(o, t.len(), || t.clone());
                }
            }
            observer.on_progress(budget.consumed(), &state.archive);
            if out.terminal {
                break;
            }
            s = s_next;
        }
    }
    Ok(())
}
