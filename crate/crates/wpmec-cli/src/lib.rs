//! Command implementations behind the `wpmec` binary: deterministic
//! training, evaluation and parameter-sweep runs with CSV metrics and
//! JSON manifests/checkpoints.

pub mod commands;
pub mod io;
pub mod manifest;

pub use commands::{cmd_evaluate, cmd_sweep, cmd_train, EvaluateArgs, SweepArgs, SweepAxis, TrainArgs};
pub use manifest::RunManifest;

use std::str::FromStr;

use wpmec_core::mtdrl::PolicyNets;
use wpmec_core::mural::RunPolicy;

/// Policy selector exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyName {
    Mural,
    Nsd,
    Oo,
    Greedy,
}

impl PolicyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyName::Mural => "mural",
            PolicyName::Nsd => "nsd",
            PolicyName::Oo => "oo",
            PolicyName::Greedy => "greedy",
        }
    }

    pub fn needs_checkpoint(&self) -> bool {
        !matches!(self, PolicyName::Greedy)
    }

    pub fn bind<'a>(&self, nets: Option<&'a PolicyNets>) -> anyhow::Result<RunPolicy<'a>> {
        match (self, nets) {
            (PolicyName::Mural, Some(n)) => Ok(RunPolicy::Mural(n)),
            (PolicyName::Nsd, Some(n)) => Ok(RunPolicy::Nsd(n)),
            (PolicyName::Oo, Some(n)) => Ok(RunPolicy::Oo(n)),
            (PolicyName::Greedy, _) => Ok(RunPolicy::Greedy),
            _ => anyhow::bail!("policy {} requires a checkpoint", self.as_str()),
        }
    }
}

impl FromStr for PolicyName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mural" => Ok(PolicyName::Mural),
            "nsd" => Ok(PolicyName::Nsd),
            "oo" => Ok(PolicyName::Oo),
            "greedy" => Ok(PolicyName::Greedy),
            other => anyhow::bail!("unknown policy '{other}' (expected mural, nsd, oo or greedy)"),
        }
    }
}
