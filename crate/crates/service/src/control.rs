//! Commands that steer a running session, shared by the wire protocol and
//! scripted config events.

use phasta_core::scenario::Cue;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One sparse matrix entry for the transition `from -> to` (state names).
/// A diagonal entry (`from == to`) addresses the state region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub from: String,
    pub to: String,
    pub value: f64,
}

/// Greediness as a full vector or as a patch keyed by state name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GreedinessSpec {
    Full(Vec<f64>),
    ByName(BTreeMap<String, f64>),
}

impl GreedinessSpec {
    /// `(state, value)` pairs to set.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<(usize, f64)>, String> {
        let out: Vec<(usize, f64)> = match self {
            GreedinessSpec::Full(g) if g.len() == names.len() => g.iter().copied().enumerate().collect(),
            GreedinessSpec::Full(g) => return Err(format!("expected {} values, got {}", names.len(), g.len())),
            GreedinessSpec::ByName(m) => m
                .iter()
                .map(|(k, &v)| {
                    names.iter().position(|s| s == k).map(|i| (i, v)).ok_or_else(|| format!("unknown state `{k}`"))
                })
                .collect::<Result<_, _>>()?,
        };
        if let Some((i, v)) = out.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("non-finite greediness {v} for `{}`", names[*i]));
        }
        Ok(out)
    }
}

/// Everything a client can ask for. Serialized with a `type` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetGreediness {
        g: GreedinessSpec,
    },
    /// Upserts bias entries; entries not listed keep their value.
    SetBias {
        #[serde(rename = "B")]
        bias: Vec<Entry>,
    },
    /// Upserts speed exponents.
    SetSpeed {
        #[serde(rename = "A")]
        speed: Vec<Entry>,
    },
    Cue {
        value: Cue,
    },
    Pause,
    Resume,
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    ClaimControl,
    ReleaseControl,
}

pub const COMMAND_TYPES: [&str; 9] = [
    "set_greediness",
    "set_bias",
    "set_speed",
    "cue",
    "pause",
    "resume",
    "reset",
    "claim_control",
    "release_control",
];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetGreediness { .. } => "set_greediness",
            Command::SetBias { .. } => "set_bias",
            Command::SetSpeed { .. } => "set_speed",
            Command::Cue { .. } => "cue",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Reset { .. } => "reset",
            Command::ClaimControl => "claim_control",
            Command::ReleaseControl => "release_control",
        }
    }

    /// Whether the command may appear in a config event list.
    pub fn is_scriptable(&self) -> bool {
        matches!(
            self,
            Command::SetGreediness { .. } | Command::SetBias { .. } | Command::SetSpeed { .. } | Command::Cue { .. }
        )
    }

    /// Whether the command needs the controller role.
    pub fn needs_control(&self) -> bool {
        !matches!(self, Command::ClaimControl | Command::ReleaseControl)
    }
}

/// Rejection of a command, reported to clients as `error{code, detail}`.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {detail}")]
pub struct CommandError {
    pub code: &'static str,
    pub detail: String,
}

impl CommandError {
    pub fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }
}

/// A command with state names resolved to indices.
#[derive(Clone, Debug, PartialEq)]
pub enum Control {
    Greediness(Vec<(usize, f64)>),
    /// `(to, from, value)`, matching the matrix layout.
    Bias(Vec<(usize, usize, f64)>),
    Speed(Vec<(usize, usize, f64)>),
    Cue(Cue),
    Pause,
    Resume,
    Reset(Option<u64>),
}

fn entries(names: &[String], list: &[Entry], what: &str) -> Result<Vec<(usize, usize, f64)>, CommandError> {
    list.iter()
        .map(|e| {
            let find = |s: &str| {
                names
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| CommandError::new("invalid", format!("{what}: unknown state `{s}`")))
            };
            if !e.value.is_finite() {
                return Err(CommandError::new("invalid", format!("{what}: non-finite value")));
            }
            Ok((find(&e.to)?, find(&e.from)?, e.value))
        })
        .collect()
}

pub fn resolve_command(cmd: &Command, names: &[String], has_scenario: bool) -> Result<Control, CommandError> {
    Ok(match cmd {
        Command::SetGreediness { g } => Control::Greediness(g.resolve(names).map_err(|d| CommandError::new("invalid", d))?),
        Command::SetBias { bias } => Control::Bias(entries(names, bias, "B")?),
        Command::SetSpeed { speed } => Control::Speed(entries(names, speed, "A")?),
        Command::Cue { value } if has_scenario => Control::Cue(*value),
        Command::Cue { .. } => return Err(CommandError::new("no_scenario", "cues need the handover scenario")),
        Command::Pause => Control::Pause,
        Command::Resume => Control::Resume,
        Command::Reset { seed } => Control::Reset(*seed),
        Command::ClaimControl | Command::ReleaseControl => {
            return Err(CommandError::new("invalid", format!("`{}` is handled by the server", cmd.name())))
        }
    })
}
