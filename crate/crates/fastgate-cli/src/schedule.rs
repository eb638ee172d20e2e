//! Schedule files: a FRAG schedule or an explicit impulse list in TOML.

use crate::config::ConfigError;
use fastgate::gatescheme::{frag_schedule, Impulse, ImpulseSequence, PulseSchedule};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragSection {
    pub tau: [f64; 3],
    pub n: u32,
}

/// A gate to evaluate. Give either `[frag]` or a list of `[[impulse]]`
/// tables; with neither the schedule is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    /// RF phase at `tau = 0`.
    pub phi_rf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frag: Option<FragSection>,
    #[serde(default, rename = "impulse", skip_serializing_if = "Vec::is_empty")]
    pub impulses: Vec<Impulse>,
}

impl ScheduleFile {
    pub fn from_schedule(s: &PulseSchedule) -> Self {
        ScheduleFile {
            phi_rf: s.phi_rf,
            frag: Some(FragSection {
                tau: s.tau,
                n: s.scale_n,
            }),
            impulses: Vec::new(),
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let s: ScheduleFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedules serialise")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, message: String| ConfigError::Invalid {
            field: field.into(),
            message,
        };
        if !self.phi_rf.is_finite() {
            return Err(bad("phi_rf", "must be finite".into()));
        }
        if self.frag.is_some() && !self.impulses.is_empty() {
            return Err(bad("impulse", "give either [frag] or [[impulse]] entries, not both".into()));
        }
        if let Some(f) = &self.frag {
            frag_schedule(f.tau, f.n, self.phi_rf).map_err(|e| bad("frag", e.to_string()))?;
        }
        if let Some(k) = self.impulses.iter().position(|i| !(i.time.is_finite() && i.count.is_finite())) {
            return Err(bad("impulse", format!("entry {k} must have finite time and count")));
        }
        Ok(())
    }

    /// The FRAG schedule, if this file holds one.
    pub fn frag_schedule(&self) -> Option<PulseSchedule> {
        self.frag.as_ref().map(|f| PulseSchedule {
            tau: f.tau,
            scale_n: f.n,
            phi_rf: self.phi_rf,
        })
    }

    pub fn sequence(&self) -> ImpulseSequence {
        match self.frag_schedule() {
            Some(s) => s.sequence(),
            None => ImpulseSequence {
                impulses: self.impulses.clone(),
                phi_rf: self.phi_rf,
            },
        }
    }
}
