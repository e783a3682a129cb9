use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cheri::{CoreConfig, MicroCap, MicroConfig};
use crate::engine::SolverOptions;
use crate::flow::{ClassOverride, FlowOptions, MicroDesign};
use crate::ir::TransitionSystem;
use crate::props::{catalogue, port_locations, ProtectedSet};

use super::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    #[default]
    Core,
    Micro,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroSection {
    pub caps: [MicroCap; 2],
    /// Protected word addresses.
    pub protected: BTreeSet<u64>,
    pub bug_off_by_one: bool,
    pub bug_settop_grows: bool,
}

impl MicroSection {
    pub fn core(&self, explicit_memory: bool) -> MicroConfig {
        MicroConfig {
            explicit_memory,
            bug_off_by_one: self.bug_off_by_one,
            bug_settop_grows: self.bug_settop_grows,
            caps: self.caps,
        }
    }

    pub fn design(&self) -> MicroDesign {
        MicroDesign {
            core: self.core(false),
            protected: self.protected.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub iteration_cap: usize,
    pub refine_on_confidentiality: bool,
    pub diagnose_toggles: bool,
    pub classification_override: Option<ClassOverride>,
    /// Locations tried first as refinement candidates.
    pub candidate_order: Vec<String>,
    /// Shuffle the candidate order with the run seed.
    pub shuffle_candidates: bool,
    /// Starting protected set when no file is given. Defaults to the
    /// program counter capability on the core and to nothing on the
    /// micro core.
    pub initial: Option<Vec<String>>,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = FlowOptions::default();
        FlowSection {
            iteration_cap: d.iteration_cap,
            refine_on_confidentiality: d.refine_on_confidentiality,
            diagnose_toggles: d.diagnose_toggles,
            classification_override: None,
            candidate_order: Vec::new(),
            shuffle_candidates: false,
            initial: None,
        }
    }
}

/// Everything a run needs, read from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub design: DesignKind,
    pub core: CoreConfig,
    pub micro: MicroSection,
    /// Properties run by `check` when none is named on the command line.
    pub properties: Vec<String>,
    pub k_upec: usize,
    pub oracle_depth: usize,
    pub solver: SolverOptions,
    /// Protected-set file. Without it, `check` uses every catalogued
    /// location and `flow` starts from `flow.initial`.
    pub protected_set: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub flow: FlowSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            design: DesignKind::Core,
            core: CoreConfig::default(),
            micro: MicroSection::default(),
            properties: vec!["integrity".into()],
            k_upec: 4,
            oracle_depth: 12,
            solver: SolverOptions::default(),
            protected_set: None,
            output_dir: PathBuf::from("capcheck-out"),
            seed: 0,
            flow: FlowSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration. Relative paths are taken
    /// relative to `base`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<RunConfig, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_string(),
            msg: e.to_string(),
        })?;
        let bad = |msg: String| CliError::Config {
            path: origin.to_string(),
            msg,
        };
        if cfg.k_upec == 0 {
            return Err(bad("key `k_upec`: must be at least 1".into()));
        }
        if cfg.oracle_depth == 0 {
            return Err(bad("key `oracle_depth`: must be at least 1".into()));
        }
        cfg.core
            .validate()
            .map_err(|e| bad(format!("table `core`: {e}")))?;
        if let Some(p) = &cfg.protected_set {
            cfg.protected_set = Some(base.join(p));
        }
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, &path.display().to_string(), base)
    }

    /// The protected set from the configured file, if any.
    pub fn protected_set_file(&self) -> Result<Option<ProtectedSet>, CliError> {
        let Some(p) = &self.protected_set else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            msg: e.to_string(),
        })?;
        Ok(Some(ProtectedSet::from_toml(&text)?))
    }

    pub fn initial_locations(&self) -> Vec<String> {
        match (&self.flow.initial, self.design) {
            (Some(v), _) => v.clone(),
            (None, DesignKind::Core) => vec!["pcc".into()],
            (None, DesignKind::Micro) => Vec::new(),
        }
    }

    pub fn flow_options(&self, ts: &TransitionSystem) -> FlowOptions {
        let mut order = self.flow.candidate_order.clone();
        if self.flow.shuffle_candidates {
            let mut rest: Vec<String> = catalogue(ts)
                .into_iter()
                .chain(port_locations(ts))
                .map(|l| l.name)
                .filter(|n| !order.contains(n))
                .collect();
            rest.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
            order.extend(rest);
        }
        FlowOptions {
            k_upec: self.k_upec,
            iteration_cap: self.flow.iteration_cap,
            refine_on_confidentiality: self.flow.refine_on_confidentiality,
            candidate_order: order,
            classification_override: self.flow.classification_override,
            diagnose_toggles: self.flow.diagnose_toggles,
            solver: self.solver.clone(),
        }
    }
}
