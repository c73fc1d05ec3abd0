//! Many-objective reinforcement learning for online testing of a driving
//! system, together with the search baselines and statistics used to compare
//! them.

pub mod action;
pub mod archive;
pub mod baselines;
pub mod budget;
pub mod env;
pub mod error;
pub mod morlot;
pub mod replay;
pub mod reward;
pub mod rl;
pub mod scalar;
pub mod state;
pub mod stats;
pub mod testcase;
pub mod trace;

pub use action::{EnvAction, ACTION_COUNT};
pub use archive::{Approach, Archive, ArchiveDocument, ObjectiveId, Offer};
pub use baselines::{evaluate, fitest_search, mosa_search, random_search, Chromosome, FitnessVector, SearchParams};
pub use budget::Budget;
pub use env::{build_env, Environment, StepOutcome};
pub use error::{Error, Result};
pub use morlot::{choose_action_multi_objs, run_morlot, update_q_tables, MorlotOptions, MorlotState};
pub use replay::{replay_test_case, ReplayReport};
pub use reward::{satisfy, RewardVector};
pub use rl::{choose_action, epsilon_at, q_update, run_single_objective, train, Exploration, LearnParams, QTable};
pub use scalar::{Scalar, SENTINEL};
pub use stats::{mann_whitney_u, tse, vargha_delaney, CampaignResult};
pub use state::{DiscretizedState, Tenths};
pub use testcase::{Step, TestCase};
pub use trace::{CoverageTimeline, RunObserver, Silent, TraceBuffer, TraceRecord};

pub type QTable64 = QTable<f64>;
pub type QTable32 = QTable<f32>;
pub type RewardVector64 = RewardVector<f64>;
pub type LearnParams64 = LearnParams<f64>;
pub type MorlotState64 = MorlotState<f64>;
