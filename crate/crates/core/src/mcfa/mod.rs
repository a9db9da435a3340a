//! Flat-closure semantics: the concrete machine, m-CFA, and the naive
//! polynomial k-CFA that differs from m-CFA only in its allocator.

mod analysis;
mod concrete;

use std::fmt;
use std::str::FromStr;

pub use analysis::{abstract_env, explore_widened_mcfa, new_abstract, MAddr, MConfig, MVal, McfaMachine, McfaResult};
pub use concrete::{new_concrete, run_flat, step_flat, FAddr, FState, FStep, FValue, FlatEnvC, FlatOutcome, FlatTrace};

/// How a fresh flat environment is chosen at each application.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// Push the call for procedures; restore the closure's environment for
    /// continuations (m-CFA).
    #[default]
    TopMFrames,
    /// Always push the call (naive polynomial k-CFA).
    LastKCalls,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::TopMFrames => "top-m-frames",
            Policy::LastKCalls => "last-k-calls",
        })
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top-m-frames" => Ok(Policy::TopMFrames),
            "last-k-calls" => Ok(Policy::LastKCalls),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}
