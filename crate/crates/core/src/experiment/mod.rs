//! Configuration-driven experiment runs and their result files.

mod config;
mod output;

pub use config::{
    load_config, GridSection, MlmcSection, OutputSection, ProblemSection, RegionEntry, RunConfig,
    TransportSection,
};
pub use output::{emit_outputs, format_number, TableRow};

use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlmc::{run_mlmc, HybridSampler, LevelSample, LevelSampler, MlmcReport};

/// One `(ε, K)` combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case_id: String,
    pub label: String,
    pub epsilon: f64,
    pub histories: u64,
    pub report: MlmcReport,
}

impl CaseResult {
    pub fn table_row(&self) -> TableRow {
        TableRow::from_case(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub case_id: String,
    pub level: usize,
    pub replicate: u64,
    pub sample: LevelSample,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputBundle {
    pub cases: Vec<CaseResult>,
    pub samples: Option<Vec<SampleRecord>>,
}

impl OutputBundle {
    pub fn rows(&self) -> Vec<TableRow> {
        self.cases.iter().map(CaseResult::table_row).collect()
    }
}

/// Records every draw of the wrapped sampler.
struct Recording<'a, S> {
    inner: &'a S,
    log: Mutex<Vec<(usize, u64, LevelSample)>>,
}

impl<S: LevelSampler> LevelSampler for Recording<'_, S> {
    fn max_level(&self) -> usize {
        self.inner.max_level()
    }

    fn sample(&self, level: usize, replicate: u64) -> Result<LevelSample> {
        let s = self.inner.sample(level, replicate)?;
        self.log.lock().expect("sample log poisoned").push((level, replicate, s));
        Ok(s)
    }
}

pub fn case_id(label: &str, epsilon: f64, histories: u64) -> String {
    format!("{label}/eps={epsilon:e}/K={histories}")
}

/// Runs every `(K, ε)` case of `config`, `K` outermost.
pub fn run_experiment(config: &RunConfig) -> Result<OutputBundle> {
    config.validate()?;
    let run = || -> Result<OutputBundle> {
        let problem = config.slab()?;
        let hierarchy = config.hierarchy()?;
        let mut bundle = OutputBundle {
            cases: Vec::new(),
            samples: config.output.sample_log.then(Vec::new),
        };
        for k in config.history_cases() {
            for &epsilon in &config.mlmc.epsilon {
                let mlmc = config.mlmc_config(epsilon, k);
                let sampler = HybridSampler {
                    problem: problem.clone(),
                    hierarchy: hierarchy.clone(),
                    histories: mlmc.histories_per_level(hierarchy.max_level()),
                    region: mlmc.functional,
                    cost_mode: mlmc.cost_mode,
                    transport: config.transport_options(),
                    master_seed: config.mlmc.seed,
                };
                let id = case_id(&config.output.case, epsilon, k);
                let report = match bundle.samples.as_mut() {
                    Some(log) => {
                        let recording = Recording {
                            inner: &sampler,
                            log: Mutex::new(Vec::new()),
                        };
                        let report = run_mlmc(&recording, &mlmc)?;
                        let draws = recording.log.into_inner().expect("sample log poisoned");
                        log.extend(draws.into_iter().map(|(level, replicate, sample)| SampleRecord {
                            case_id: id.clone(),
                            level,
                            replicate,
                            sample,
                        }));
                        report
                    }
                    None => run_mlmc(&sampler, &mlmc)?,
                };
                bundle.cases.push(CaseResult {
                    case_id: id,
                    label: config.output.case.clone(),
                    epsilon,
                    histories: k,
                    report,
                });
            }
        }
        Ok(bundle)
    };

    if config.mlmc.parallelism > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.mlmc.parallelism)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}
