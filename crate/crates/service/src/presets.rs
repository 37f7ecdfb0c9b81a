//! Built-in runs behind `reproduce`. Each preset is a base config plus
//! overrides; multi-panel figures add one override set per panel.

use crate::config::{parse, ConfigError, Model};

pub const THREE_CYCLE: &str = include_str!("../configs/three_cycle.json");
pub const HANDOVER: &str = include_str!("../configs/handover.json");
const FORK: &str = include_str!("../configs/presets/fork.json");

#[derive(Clone, Copy, Debug)]
pub struct Panel {
    /// Appended to the output file stem; empty for single-panel figures.
    pub suffix: &'static str,
    pub overrides: &'static [&'static str],
}

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub base: &'static str,
    pub overrides: &'static [&'static str],
    pub panels: &'static [Panel],
}

const SINGLE: &[Panel] = &[Panel { suffix: "", overrides: &[] }];

const FIG4_BIAS: &str = "modulation.constant_bias=[0.0, 5.5e-4, 4.5e-4]";

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1",
        summary: "canonical three-state cycle s1 -> s2 -> s3 -> s1",
        base: THREE_CYCLE,
        overrides: &["output.path=null"],
        panels: SINGLE,
    },
    Preset {
        name: "fig3",
        summary: "activations and phases of the three-state cycle, every tick",
        base: THREE_CYCLE,
        overrides: &["output.path=null", "output.decimation=1"],
        panels: SINGLE,
    },
    Preset {
        name: "fig4",
        summary: "uniform greediness on two competing transitions s0 -> s1, s0 -> s2",
        base: FORK,
        overrides: &[FIG4_BIAS, "modulation.epsilon=1e-5", "run.duration=4.0"],
        panels: &[
            Panel { suffix: "a", overrides: &["modulation.greediness=[1, 1, 1]"] },
            Panel { suffix: "b", overrides: &["modulation.greediness=[8, 8, 8]"] },
            Panel {
                suffix: "c",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.3}}, "command": {"type": "set_greediness", "g": [0, 0, 0]}}]"#,
                ],
            },
            Panel {
                suffix: "d",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.3}}, "command": {"type": "set_greediness", "g": [-2, -2, -2]}}]"#,
                ],
            },
        ],
    },
    Preset {
        name: "fig5",
        summary: "speed exponents A = -5, 0, +5 on the three cycle transitions",
        base: THREE_CYCLE,
        overrides: &[
            "output.path=null",
            "output.decimation=1",
            "system.dt=2.5e-4",
            "run.duration=16.0",
            r#"modulation.speed=[{"from": "s1", "to": "s2", "value": -5}, {"from": "s2", "to": "s3", "value": 0}, {"from": "s3", "to": "s1", "value": 5}]"#,
        ],
        panels: SINGLE,
    },
    Preset {
        name: "fig6",
        summary: "non-positive greediness switched in mid-transition: halt, reverse, reverse and balance",
        base: FORK,
        overrides: &[],
        panels: &[
            Panel {
                suffix: "a",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.4}}, "command": {"type": "set_greediness", "g": [1, 0, 0]}}]"#,
                ],
            },
            Panel {
                suffix: "b",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.5}}, "command": {"type": "set_greediness", "g": [1, -1, -1]}}]"#,
                ],
            },
            Panel {
                suffix: "c",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.5}}, "command": {"type": "set_greediness", "g": [1, -2, -2]}}]"#,
                ],
            },
        ],
    },
    Preset {
        name: "fig7",
        summary: "asymmetric greediness reconsiders a decision for s1 in favour of s2",
        base: FORK,
        overrides: &[
            r#"modulation.bias=[{"from": "s0", "to": "s1", "value": 1e-3}, {"from": "s0", "to": "s2", "value": 1e-4}]"#,
        ],
        panels: &[
            Panel { suffix: "base", overrides: &[] },
            Panel {
                suffix: "a",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.3}}, "command": {"type": "set_greediness", "g": [0, 0, 1]}}]"#,
                ],
            },
            Panel {
                suffix: "b",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.3}}, "command": {"type": "set_greediness", "g": [0, 0.5, 2]}}]"#,
                ],
            },
            Panel {
                suffix: "c",
                overrides: &[
                    r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.3}}, "command": {"type": "set_greediness", "g": [0, -1, 20]}}]"#,
                ],
            },
        ],
    },
    Preset {
        name: "fig8",
        summary: "greediness switched from [1, 1, 1] to [1, 5, 0] during a balanced fork",
        base: FORK,
        overrides: &[
            "modulation.constant_bias=[0.0, 1e-3, 1e-3]",
            "run.duration=4.0",
            r#"scenario.events=[{"at": {"phase": {"from": "s0", "to": "s1", "above": 0.3}}, "command": {"type": "set_greediness", "g": [1, 5, 0]}}]"#,
        ],
        panels: SINGLE,
    },
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    /// One resolved model per panel. `extra` overrides are applied last.
    pub fn models(&self, extra: &[String]) -> Result<Vec<(&'static str, Model)>, ConfigError> {
        self.panels
            .iter()
            .map(|panel| {
                let overrides: Vec<String> = self
                    .overrides
                    .iter()
                    .chain(panel.overrides)
                    .map(|s| s.to_string())
                    .chain(extra.iter().cloned())
                    .collect();
                Ok((panel.suffix, parse(self.base, &overrides)?))
            })
            .collect()
    }

    pub fn panel(&self, suffix: &str, extra: &[String]) -> Result<Model, ConfigError> {
        self.models(extra)?
            .into_iter()
            .find(|(s, _)| *s == suffix)
            .map(|(_, m)| m)
            .ok_or_else(|| ConfigError::Invalid { field: "panel".into(), detail: format!("{} has no panel `{suffix}`", self.name) })
    }
}
