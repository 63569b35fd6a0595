//! DQN training: replay with n-step returns, target network, ε-greedy
//! exploration, replay-ratio control, offline training and analysis hooks.

mod dqn;
mod hooks;
mod log;
mod replay;
mod supervised;
mod training;

pub use dqn::{
    argmax, epsilon_greedy, td_loss_and_grad, td_targets, train_step, AgentState, DqnConfig,
};
pub use hooks::{
    greedy_rollouts, DormancyProbe, HookContext, HookEvent, LayerReset, PruneProbe, Recycler,
    StateSource, TrainingHook, Trigger,
};
pub use log::{
    DormancyRow, MetricRow, MetricSeries, OverlapRow, PruneRow, RecycleRow, RunLog,
};
pub use replay::{NStepTransition, ReplayBuffer, Transition};
pub use supervised::{accuracy, run_supervised, SupervisedConfig, SupervisedOutput};
pub use training::{
    collect_random, evaluate, penultimate_features, run_offline, run_offline_from, run_training,
    run_training_from, OfflineTargets, RunOutput,
};
