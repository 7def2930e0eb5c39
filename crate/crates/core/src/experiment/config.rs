use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{GridHierarchy, RegionSpec};
use crate::mlmc::{CostMode, MlmcConfig};
use crate::transport::{MaterialRegion, SlabProblem, TransportOptions};

/// Tolerance for deciding that an interface sits on a coarse-grid edge.
const ALIGNMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub mlmc: MlmcSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub regions: Vec<RegionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    pub lower: f64,
    pub upper: f64,
    pub sigma_t: f64,
    /// `c = Σ_s / Σ_t`.
    pub scattering_ratio: f64,
    pub source: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub coarse_cells: usize,
    /// Finest level `L`.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlmcSection {
    pub epsilon: Vec<f64>,
    /// Uniform `K` values; every entry is a separate case.
    pub histories: Vec<u64>,
    /// Per-level `K_l`, overriding `histories` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_histories: Option<Vec<u64>>,
    #[serde(default = "default_initial_samples")]
    pub initial_samples: u64,
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default = "default_functional")]
    pub functional: RegionSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub cost_mode: CostMode,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub transport: TransportSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub weight_cutoff: f64,
    pub survival_probability: f64,
}

impl Default for TransportSection {
    fn default() -> Self {
        let d = TransportOptions::default();
        Self {
            weight_cutoff: d.weight_cutoff,
            survival_probability: d.survival_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Label of the case column, e.g. the varied scattering ratio.
    pub case: String,
    pub sample_log: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            case: "case".into(),
            sample_log: false,
        }
    }
}

fn default_initial_samples() -> u64 {
    10
}
fn default_passes() -> usize {
    3
}
fn default_functional() -> RegionSpec {
    RegionSpec::WholeDomain
}
fn default_seed() -> u64 {
    1
}
fn default_parallelism() -> usize {
    1
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn slab(&self) -> Result<SlabProblem> {
        SlabProblem::new(
            self.problem
                .regions
                .iter()
                .map(|r| {
                    MaterialRegion::with_scattering_ratio(
                        r.lower,
                        r.upper,
                        r.sigma_t,
                        r.scattering_ratio,
                        r.source,
                    )
                })
                .collect(),
        )
    }

    pub fn hierarchy(&self) -> Result<GridHierarchy> {
        GridHierarchy::build(self.grid.length, self.grid.coarse_cells, self.grid.levels)
    }

    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions {
            weight_cutoff: self.mlmc.transport.weight_cutoff,
            survival_probability: self.mlmc.transport.survival_probability,
            parallel: self.mlmc.parallelism > 1,
            ..TransportOptions::default()
        }
    }

    /// Driver configuration for one `(ε, K)` case.
    pub fn mlmc_config(&self, epsilon: f64, histories: u64) -> MlmcConfig {
        MlmcConfig {
            epsilon,
            histories: self
                .mlmc
                .level_histories
                .clone()
                .unwrap_or_else(|| vec![histories]),
            initial_samples: self.mlmc.initial_samples,
            passes: self.mlmc.passes,
            functional: self.mlmc.functional,
            cost_mode: self.mlmc.cost_mode,
        }
    }

    /// `K` values that label the cases.
    pub fn history_cases(&self) -> Vec<u64> {
        match &self.mlmc.level_histories {
            Some(per_level) => vec![per_level[0]],
            None => self.mlmc.histories.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let problem = self.slab()?;
        if problem.length() != self.grid.length {
            return Err(Error::InvalidConfig(format!(
                "regions end at {} but grid length is {}",
                problem.length(),
                self.grid.length
            )));
        }
        if !(problem.total_source() > 0.0) {
            return Err(Error::InvalidConfig("at least one region needs a positive source".into()));
        }
        let hierarchy = self.hierarchy()?;
        let cells = self.grid.coarse_cells as f64;
        for x in problem.interfaces() {
            let position = x / self.grid.length * cells;
            if (position - position.round()).abs() > ALIGNMENT_TOLERANCE {
                return Err(Error::MisalignedInterface {
                    breakpoint: x,
                    coarse_cells: self.grid.coarse_cells,
                });
            }
        }
        self.mlmc.functional.bounds(&hierarchy)?;
        if self.mlmc.epsilon.is_empty() {
            return Err(Error::InvalidConfig("epsilon list is empty".into()));
        }
        if self.mlmc.histories.is_empty() && self.mlmc.level_histories.is_none() {
            return Err(Error::InvalidConfig("histories list is empty".into()));
        }
        if self.mlmc.parallelism == 0 {
            return Err(Error::InvalidConfig("parallelism must be at least 1".into()));
        }
        self.transport_options().validate()?;
        for &eps in &self.mlmc.epsilon {
            for k in self.history_cases() {
                self.mlmc_config(eps, k).validate(self.grid.levels)?;
            }
        }
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_MATERIAL: &str = r#"
[problem]
regions = [
  { lower = 0.0, upper = 0.5, sigma_t = 1.0, scattering_ratio = 0.9, source = 1.0 },
  { lower = 0.5, upper = 1.0, sigma_t = 1.0, scattering_ratio = 0.5, source = 1.0 },
]

[grid]
length = 1.0
coarse_cells = 16
levels = 3

[mlmc]
epsilon = [1e-2, 5e-3, 1e-3]
histories = [1000, 10000]

[output]
directory = "out/two"
case = "0.5"
"#;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("inline.toml"))
    }

    #[test]
    fn two_material_parses() {
        let c = parse(TWO_MATERIAL).unwrap();
        assert_eq!(c.problem.regions.len(), 2);
        assert_eq!(c.problem.regions[0].scattering_ratio, 0.9);
        assert_eq!(c.grid.coarse_cells, 16);
        assert_eq!(c.mlmc.initial_samples, 10);
        assert_eq!(c.mlmc.passes, 3);
        assert_eq!(c.mlmc.functional, RegionSpec::WholeDomain);
        assert_eq!(c.mlmc.cost_mode, CostMode::Measured);
        assert_eq!(c.history_cases(), vec![1000, 10000]);
        let p = c.slab().unwrap();
        assert!((p.regions()[1].sigma_s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn misaligned_interface_names_breakpoint() {
        let text = TWO_MATERIAL.replace("0.5, sigma_t = 1.0, scattering_ratio = 0.9", "0.3, sigma_t = 1.0, scattering_ratio = 0.9")
            .replace("lower = 0.5", "lower = 0.3");
        match parse(&text) {
            Err(Error::MisalignedInterface { breakpoint, coarse_cells }) => {
                assert_eq!(breakpoint, 0.3);
                assert_eq!(coarse_cells, 16);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let c = parse(TWO_MATERIAL).unwrap();
        let again = parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn coarse_cell_functional() {
        let text = TWO_MATERIAL.replace(
            "histories = [1000, 10000]",
            "histories = [10000]\nfunctional = { coarse_cell = 8 }\ncost_mode = \"proxy\"",
        );
        let c = parse(&text).unwrap();
        assert_eq!(c.mlmc.functional, RegionSpec::CoarseCell(8));
        assert_eq!(c.mlmc.cost_mode, CostMode::Proxy);

        let bad = text.replace("coarse_cell = 8", "coarse_cell = 17");
        assert!(matches!(parse(&bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn parse_error_reports_location() {
        let err = parse("[grid]\nlength = \n").unwrap_err();
        let Error::Parse { message, .. } = &err else {
            panic!("unexpected {err:?}");
        };
        assert!(message.contains("line 2"), "{message}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = TWO_MATERIAL.replace("levels = 3", "levels = 3\nrefinement = 3");
        assert!(matches!(parse(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn too_few_levels_rejected() {
        let text = TWO_MATERIAL.replace("levels = 3", "levels = 1");
        assert!(matches!(parse(&text), Err(Error::InvalidConfig(_))));
    }
}
