//! Offline symbolic replay of concrete traces.

mod expr;
mod replay;

pub use expr::{simplify, Kind, MissingBinding, SymExpr, Var};
pub use replay::{ite_chain, replay_symbolic, BranchConstraint, PathCondition, Replay, ReplayError, SymMemory};
