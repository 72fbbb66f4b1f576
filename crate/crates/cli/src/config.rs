use std::path::Path;

use cosparse::model::LearningParams;
use cosparse::reconstruction::validate_schedule;
use cosparse::registration::Group;
use cosparse::synth::ModalityPair;
use cosparse::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Parameters for every subcommand, one table per command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default)]
    pub register: RegisterConfig,
    #[serde(default)]
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub nu: f64,
    pub kappa_u: f64,
    pub kappa_v: f64,
    pub mu_u: f64,
    pub mu_v: f64,
    pub rows: usize,
    pub patch_side: usize,
    pub patches_per_image: usize,
    pub iterations: usize,
    pub scenes: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            nu: 400.0,
            kappa_u: 5.0,
            kappa_v: 22.0,
            mu_u: 1.0,
            mu_v: 1.0,
            rows: 16,
            patch_side: 3,
            patches_per_image: 100,
            iterations: 300,
            scenes: 10,
        }
    }
}

impl LearnConfig {
    pub fn params(&self) -> LearningParams {
        LearningParams { nu: self.nu, kappa_u: self.kappa_u, kappa_v: self.kappa_v, mu_u: self.mu_u, mu_v: self.mu_v }
    }

    pub fn set_params(&mut self, p: LearningParams) {
        (self.nu, self.kappa_u, self.kappa_v, self.mu_u, self.mu_v) = (p.nu, p.kappa_u, p.kappa_v, p.mu_u, p.mu_v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub factor: usize,
    pub lambda_schedule: Vec<f64>,
    pub stage_iterations: usize,
    /// Images are multiplied by this before solving and divided after.
    pub value_scale: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { factor: 2, lambda_schedule: vec![10.0, 1.0], stage_iterations: 200, value_scale: 255.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterConfig {
    pub group: String,
    pub levels: usize,
    /// Pixels excluded on every side of the fixed image.
    pub margin: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        Self { group: "SE2".into(), levels: 4, margin: 32, max_iterations: 100, gradient_tolerance: 1e-6 }
    }
}

impl RegisterConfig {
    pub fn group(&self) -> Result<Group> {
        self.group.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub size: usize,
    pub pair: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { size: 64, pair: ModalityPair::IntensityDepth.to_string() }
    }
}

impl SynthConfig {
    pub fn pair(&self) -> Result<ModalityPair> {
        self.pair.parse()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            learn: LearnConfig::default(),
            reconstruct: ReconstructConfig::default(),
            register: RegisterConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version)));
        }
        let l = &self.learn;
        l.params().validate()?;
        if l.patch_side < 2 || l.rows + 1 < l.patch_side * l.patch_side || l.iterations == 0 || l.patches_per_image == 0 {
            return Err(invalid(format!("learn: invalid sizes {l:?}")));
        }
        if l.scenes == 0 {
            return Err(invalid("learn: at least one scene is required".into()));
        }
        let r = &self.reconstruct;
        validate_schedule(&r.lambda_schedule)?;
        if r.factor == 0 || r.stage_iterations == 0 || !(r.value_scale > 0.0 && r.value_scale.is_finite()) {
            return Err(invalid(format!("reconstruct: invalid settings {r:?}")));
        }
        let g = &self.register;
        g.group()?;
        if g.levels == 0 || g.max_iterations == 0 || !(g.gradient_tolerance > 0.0) {
            return Err(invalid(format!("register: invalid settings {g:?}")));
        }
        self.synth.pair()?;
        if self.synth.size < cosparse::synth::MIN_SCENE_SIZE {
            return Err(invalid(format!("synth: size must be at least {}", cosparse::synth::MIN_SCENE_SIZE)));
        }
        Ok(())
    }
}
