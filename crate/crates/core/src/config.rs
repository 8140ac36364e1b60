//! JSON configuration. Every field has a default, so `{}` describes the
//! stock robot and gait.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::RobotModel;
use crate::gait::{GaitParams, StandParams, SwimWaveParams};
use crate::sim::SimParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Stability,
    Displacement,
    Fault,
    Stand,
    Swim,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Stability,
        ScenarioKind::Displacement,
        ScenarioKind::Fault,
        ScenarioKind::Stand,
        ScenarioKind::Swim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Stability => "stability",
            ScenarioKind::Displacement => "displacement",
            ScenarioKind::Fault => "fault",
            ScenarioKind::Stand => "stand",
            ScenarioKind::Swim => "swim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub robot: RobotModel,
    pub gait: GaitParams,
    pub stand: StandParams,
    pub sim: SimParams,
    pub swim: SwimWaveParams,
    pub scenario: Option<ScenarioKind>,
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Full document with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.robot.validate().map_err(wrap)?;
        self.gait.validate().map_err(wrap)?;
        self.stand.validate().map_err(wrap)?;
        self.sim.validate().map_err(wrap)?;
        self.swim.validate().map_err(wrap)?;
        Ok(())
    }
}
