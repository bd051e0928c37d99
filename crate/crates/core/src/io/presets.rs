//! Scenario files bundled with the tool (also shipped as `presets/*.cfg`).

use crate::io::config::{parse_config, ConfigError, Scenario};

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "enhancement",
        text: include_str!("../../../../presets/enhancement.cfg"),
    },
    Preset {
        name: "equilibrium",
        text: include_str!("../../../../presets/equilibrium.cfg"),
    },
    Preset {
        name: "degeneration",
        text: include_str!("../../../../presets/degeneration.cfg"),
    },
    Preset {
        name: "threshold",
        text: include_str!("../../../../presets/threshold.cfg"),
    },
    Preset {
        name: "collapse",
        text: include_str!("../../../../presets/collapse.cfg"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Option<Result<Scenario, ConfigError>> {
    find(name).map(|p| parse_config(p.text))
}
