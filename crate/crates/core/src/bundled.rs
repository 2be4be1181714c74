//! The two bundled subject models, their properties and campaign configs.

use crate::campaign::{CampaignConfig, CampaignError, LoadedCampaign};

/// A bundled subject: model and property sources plus a default campaign.
#[derive(Debug, Clone, Copy)]
pub struct Subject {
    pub name: &'static str,
    pub model: &'static str,
    pub property: &'static str,
    pub campaign: &'static str,
}

pub const MINI_ATC: Subject = Subject {
    name: "mini-atc",
    model: include_str!("../assets/mini-atc.dfm"),
    property: include_str!("../assets/mini-atc.stl"),
    campaign: include_str!("../assets/mini-atc.campaign.json"),
};

pub const MINI_ACTUATOR: Subject = Subject {
    name: "mini-actuator",
    model: include_str!("../assets/mini-actuator.dfm"),
    property: include_str!("../assets/mini-actuator.stl"),
    campaign: include_str!("../assets/mini-actuator.campaign.json"),
};

pub const SUBJECTS: [Subject; 2] = [MINI_ATC, MINI_ACTUATOR];

impl Subject {
    pub fn config(&self) -> CampaignConfig {
        CampaignConfig::from_json(self.campaign).expect("bundled config is valid")
    }

    /// The subject's campaign with `config` replacing the bundled one.
    pub fn load_with(&self, config: CampaignConfig) -> Result<LoadedCampaign, CampaignError> {
        LoadedCampaign::from_sources(config, self.model.to_string(), self.property.to_string())
    }

    pub fn load(&self) -> Result<LoadedCampaign, CampaignError> {
        self.load_with(self.config())
    }
}

pub fn subject(name: &str) -> Option<Subject> {
    SUBJECTS.iter().copied().find(|s| s.name == name)
}
