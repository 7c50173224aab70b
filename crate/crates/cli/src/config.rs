use std::path::{Path, PathBuf};

use h4bp::continuation::{FamilySeed, Limits};
use h4bp::propagation::IntegratorConfig;
use h4bp::reference::SUN_JUPITER_MU;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a `trace` run needs. The JSON form of a config file uses the
/// same field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    pub mu: f64,
    pub families: Vec<String>,
    pub limits: Limits,
    pub integrator: IntegratorConfig,
    pub output_dir: PathBuf,
    pub plot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mu: SUN_JUPITER_MU,
            families: Vec::new(),
            limits: Limits::default(),
            integrator: IntegratorConfig::default(),
            output_dir: PathBuf::from("h4bp-out"),
            plot: false,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mu: Option<f64>,
    pub families: Option<Vec<String>>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub max_members: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub plot: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::BadArguments(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::BadArguments(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(mu) = o.mu {
            self.mu = mu;
        }
        if let Some(f) = o.families {
            self.families = f;
        }
        if let Some(c) = o.c_min {
            self.limits.c_min = c;
        }
        if let Some(c) = o.c_max {
            self.limits.c_max = c;
        }
        if let Some(n) = o.max_members {
            self.limits.max_members = n;
        }
        if let Some(d) = o.output_dir {
            self.output_dir = d;
        }
        self.plot |= o.plot;
    }

    /// Parsed family list, or every problem with the config at once.
    pub fn validate(&self) -> Result<Vec<FamilySeed>, CliError> {
        let mut problems = Vec::new();
        if !(0.0..=0.5).contains(&self.mu) {
            problems.push(format!("mu = {} is outside [0, 1/2]", self.mu));
        }
        if self.families.is_empty() {
            problems.push("no families requested".to_string());
        }
        let mut seeds = Vec::new();
        for name in &self.families {
            match name.parse::<FamilySeed>() {
                Ok(s) if seeds.contains(&s) => problems.push(format!("family `{name}` requested twice")),
                Ok(s) => seeds.push(s),
                Err(e) => problems.push(e.to_string()),
            }
        }
        if self.limits.c_min.is_nan() || self.limits.c_max.is_nan() || self.limits.c_min >= self.limits.c_max {
            problems.push(format!("empty range c_min = {} .. c_max = {}", self.limits.c_min, self.limits.c_max));
        }
        if self.limits.max_members < 2 {
            problems.push("maxMembers must be at least 2".to_string());
        }
        if let Err(e) = self.integrator.validate() {
            problems.push(e.to_string());
        }
        if self.output_dir.as_os_str().is_empty() {
            problems.push("outputDir is empty".to_string());
        }
        if problems.is_empty() {
            Ok(seeds)
        } else {
            Err(CliError::BadArguments(problems.join("; ")))
        }
    }
}
