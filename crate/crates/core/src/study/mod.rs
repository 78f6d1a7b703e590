//! The simulation study: simulate replicates per scenario, fit every
//! model, score all 25 tools and aggregate selections, RMSEs and
//! posterior correlations.
//!
//! Seeds form a hierarchy so any cell can be rerun alone:
//! master -> dataset seed per (scenario, replicate) -> chain seed per model
//! -> replicate-simulation seed for D∞.

mod config;
pub mod output;
mod summary;
mod tools;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{all_criteria, Criterion, CriterionResult};
use crate::error::{Error, Result};
use crate::io::dataset_hash;
use crate::marglik::{
    fit_chain_tuning, gd_il_with, gd_map_with, harmonic_mean, integrated_log_likelihoods,
    map_conditional_logliks, map_refine, LogMarginal, Method, TuningKind,
};
use crate::mcmc::{fit, Chain, McmcConfig};
use crate::model::{CaptureDataset, ModelId, Param, PriorSpec};
use crate::numeric::mix_seed;
use crate::simulate::{simulate_dataset, Scenario, SurveyDesign, TruthRecord};

pub use config::{DesignConfig, ScenarioSet, StudyConfig};
pub use summary::{average_rmse_of, correlation_matrix, mse, tracked_series, Correlations, N_LABEL};
pub use tools::{select, Selection, ToolId};

pub fn dataset_seed(master: u64, scenario: u32, replicate: usize) -> u64 {
    mix_seed(mix_seed(master, scenario as u64), replicate as u64)
}

pub fn chain_seed(dataset_seed: u64, model: ModelId) -> u64 {
    mix_seed(dataset_seed, 0x100 + model.index() as u64)
}

pub fn ppl_seed(chain_seed: u64) -> u64 {
    mix_seed(chain_seed, 0x5eed)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// One marginal-likelihood estimate, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarglikRow {
    pub tool: ToolId,
    pub value: Option<f64>,
    pub mc_se: Option<f64>,
    pub dropped: usize,
    pub unreliable: bool,
    pub error: Option<String>,
}

impl MarglikRow {
    pub fn new(tool: ToolId, r: Result<LogMarginal>) -> Self {
        match r {
            Ok(m) => MarglikRow {
                tool,
                value: finite(m.value),
                mc_se: finite(m.mc_se),
                dropped: m.dropped,
                unreliable: m.unreliable,
                error: None,
            },
            Err(e) => MarglikRow::failed(tool, e.to_string()),
        }
    }

    pub fn failed(tool: ToolId, error: String) -> Self {
        MarglikRow {
            tool,
            value: None,
            mc_se: None,
            dropped: 0,
            unreliable: true,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub criterion: Criterion,
    pub value: Option<f64>,
    pub fit_term: Option<f64>,
    pub penalty: Option<f64>,
    pub thin: usize,
    pub seed: Option<u64>,
}

impl From<&CriterionResult> for CriterionRow {
    fn from(c: &CriterionResult) -> Self {
        CriterionRow {
            criterion: c.criterion,
            value: finite(c.value),
            fit_term: finite(c.fit_term),
            penalty: finite(c.penalty),
            thin: c.thin,
            seed: c.seed,
        }
    }
}

/// Everything kept from fitting one model to one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCell {
    pub model: ModelId,
    pub chain_seed: u64,
    pub n_draws: usize,
    pub marglik: Vec<MarglikRow>,
    pub criteria: Vec<CriterionRow>,
    pub criteria_error: Option<String>,
    /// Per-replicate MSE of each tracked series against the truth.
    pub mse: Vec<(String, f64)>,
    pub correlations: Correlations,
}

impl ModelCell {
    pub fn score(&self, tool: &ToolId) -> Option<f64> {
        match tool {
            ToolId::Marginal { .. } => self.marglik.iter().find(|r| r.tool == *tool).and_then(|r| r.value),
            ToolId::Criterion(c) => self.criteria.iter().find(|r| r.criterion == *c).and_then(|r| r.value),
        }
    }

    pub fn mse_of(&self, label: &str) -> Option<f64> {
        self.mse.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CellStatus {
    Complete,
    Failed { reason: String },
}

/// Results of one (scenario, replicate) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: u32,
    pub replicate: usize,
    pub config_hash: String,
    pub dataset_seed: u64,
    pub dataset_hash: String,
    pub n_true: usize,
    pub status: CellStatus,
    pub models: Vec<ModelCell>,
    pub selections: Vec<Selection>,
}

impl CellResult {
    pub fn is_complete(&self) -> bool {
        self.status == CellStatus::Complete
    }

    pub fn model(&self, m: ModelId) -> Option<&ModelCell> {
        self.models.iter().find(|c| c.model == m)
    }

    pub fn selection(&self, tool: &ToolId) -> Option<&Selection> {
        self.selections.iter().find(|s| s.tool == *tool)
    }
}

fn truth_of(truth: &TruthRecord, label: &str) -> f64 {
    if label == N_LABEL {
        truth.n as f64
    } else {
        truth.params.get(label.parse::<Param>().expect("tracked label"))
    }
}

/// Scores of one chain under a set of tools.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainScores {
    pub marglik: Vec<MarglikRow>,
    pub criteria: Vec<CriterionRow>,
    pub criteria_error: Option<String>,
}

/// Evaluates the requested tools on a fitted chain. Marginal-likelihood rows
/// follow the order of [`ToolId::all`]; criteria are computed together when
/// any of them is asked for. Work a tool does not need (MAP refinement, the
/// integrated likelihood, replicate simulation) is skipped.
pub fn score_chain(
    chain: &Chain,
    data: &CaptureDataset,
    prior: &PriorSpec,
    tools: &[ToolId],
    ppl_seed: u64,
    ppl_thin: usize,
) -> Result<ChainScores> {
    let wanted = |t: &ToolId| tools.contains(t);
    let all = ToolId::all();
    let need = |m: Method| all.iter().any(|t| matches!(t, ToolId::Marginal { method, .. } if *method == m) && wanted(t));
    let need_criteria = tools.iter().any(|t| matches!(t, ToolId::Criterion(_)));

    let map = (need(Method::GdMap) || need_criteria).then(|| map_refine(chain, data, prior));
    let map_ll = match (&map, need(Method::GdMap)) {
        (Some(map), true) => map_conditional_logliks(chain, data, map),
        _ => Vec::new(),
    };
    let il = if need(Method::GdIl) {
        integrated_log_likelihoods(chain, data, &data.statespace().grid()?)?
    } else {
        Vec::new()
    };

    let mut map_rows = Vec::new();
    let mut il_rows = Vec::new();
    for kind in TuningKind::STUDY {
        let map_tool = ToolId::Marginal { method: Method::GdMap, tuning: Some(kind) };
        let il_tool = ToolId::Marginal { method: Method::GdIl, tuning: Some(kind) };
        if !wanted(&map_tool) && !wanted(&il_tool) {
            continue;
        }
        match fit_chain_tuning(chain, prior, kind) {
            Ok(g) => {
                if wanted(&map_tool) {
                    map_rows.push(MarglikRow::new(map_tool, gd_map_with(chain, prior, &g, &map_ll)));
                }
                if wanted(&il_tool) {
                    il_rows.push(MarglikRow::new(il_tool, gd_il_with(chain, prior, &g, &il)));
                }
            }
            Err(e) => {
                if wanted(&map_tool) {
                    map_rows.push(MarglikRow::failed(map_tool, e.to_string()));
                }
                if wanted(&il_tool) {
                    il_rows.push(MarglikRow::failed(il_tool, e.to_string()));
                }
            }
        }
    }
    let mut marglik = map_rows;
    marglik.extend(il_rows);
    let hm = ToolId::Marginal { method: Method::Hm, tuning: None };
    if wanted(&hm) {
        marglik.push(MarglikRow::new(hm, harmonic_mean(chain)));
    }

    let (criteria, criteria_error) = match &map {
        Some(map) if need_criteria => match all_criteria(chain, data, map, ppl_seed, ppl_thin) {
            Ok(c) => (c.iter().map(CriterionRow::from).collect(), None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        },
        _ => (Vec::new(), None),
    };
    Ok(ChainScores {
        marglik,
        criteria,
        criteria_error,
    })
}

/// Fits one model and evaluates every tool on it.
pub fn evaluate_model(
    model: ModelId,
    data: &CaptureDataset,
    truth: &TruthRecord,
    design: &SurveyDesign,
    mcmc: &McmcConfig,
    seed: u64,
    ppl_thin: usize,
) -> Result<ModelCell> {
    let prior = PriorSpec::for_statespace(&design.statespace);
    let config = McmcConfig { seed, ..mcmc.clone() };
    let chain = fit(model, data, &prior, &config)?;
    let scores = score_chain(&chain, data, &prior, &ToolId::all(), ppl_seed(seed), ppl_thin)?;

    let mse = tracked_series(&chain)
        .into_iter()
        .map(|(label, series)| {
            let v = summary::mse(&series, truth_of(truth, &label));
            (label, v)
        })
        .collect();
    Ok(ModelCell {
        model,
        chain_seed: seed,
        n_draws: chain.len(),
        marglik: scores.marglik,
        criteria: scores.criteria,
        criteria_error: scores.criteria_error,
        mse,
        correlations: Correlations::of_chain(&chain),
    })
}

/// Simulates, fits and scores one (scenario, replicate) cell.
pub fn run_cell(cfg: &StudyConfig, scenario: &Scenario, replicate: usize) -> Result<CellResult> {
    let design = cfg.design.build()?;
    let seed = dataset_seed(cfg.master_seed, scenario.id, replicate);
    let (data, truth) = simulate_dataset(scenario, &design, seed, cfg.sex_reveal)?;
    let mut cell = CellResult {
        scenario: scenario.id,
        replicate,
        config_hash: cfg.hash(),
        dataset_seed: seed,
        dataset_hash: dataset_hash(&data),
        n_true: truth.n,
        status: CellStatus::Complete,
        models: Vec::with_capacity(cfg.models.len()),
        selections: Vec::new(),
    };
    for &model in &cfg.models {
        match evaluate_model(model, &data, &truth, &design, &cfg.mcmc, chain_seed(seed, model), cfg.ppl_thin) {
            Ok(mc) => cell.models.push(mc),
            Err(e) => {
                log::warn!("scenario {} replicate {replicate}: {model} failed: {e}", scenario.id);
                cell.status = CellStatus::Failed { reason: format!("{model}: {e}") };
                return Ok(cell);
            }
        }
    }
    for tool in ToolId::all() {
        let scores: Vec<Option<f64>> = cell.models.iter().map(|m| m.score(&tool)).collect();
        cell.selections.push(select(tool, &cfg.models, &scores));
    }
    Ok(cell)
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub workers: usize,
    /// Directory for per-cell JSON checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    /// Reuse existing checkpoints instead of recomputing them.
    pub resume: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            workers: 1,
            checkpoint_dir: None,
            resume: false,
        }
    }
}

pub fn checkpoint_path(dir: &Path, scenario: u32, replicate: usize) -> PathBuf {
    dir.join(format!("scenario{scenario:02}_rep{replicate:03}.json"))
}

fn load_checkpoint(path: &Path, hash: &str) -> Result<Option<CellResult>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cell: CellResult =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    if cell.config_hash != hash {
        return Err(Error::arg(format!(
            "checkpoint {} was written under a different study configuration",
            path.display()
        )));
    }
    Ok(Some(cell))
}

fn save_checkpoint(path: &Path, cell: &CellResult) -> Result<()> {
    let json = serde_json::to_string(cell).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// All cells of a study, in (scenario, replicate) order.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResults {
    pub config: StudyConfig,
    pub cells: Vec<CellResult>,
}

/// Runs every (scenario, replicate) cell on a pool of `workers` threads.
/// A failed fit marks its cell incomplete; the study carries on.
pub fn run_study(cfg: &StudyConfig, opts: &StudyOptions) -> Result<StudyResults> {
    cfg.validate()?;
    let scenarios = cfg.scenario_list()?;
    let hash = cfg.hash();
    if let Some(dir) = &opts.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let jobs: Vec<(Scenario, usize)> = scenarios
        .iter()
        .flat_map(|s| (0..cfg.n_sim).map(move |r| (*s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<Result<CellResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|(sc, rep)| {
                let path = opts.checkpoint_dir.as_ref().map(|d| checkpoint_path(d, sc.id, *rep));
                if let (true, Some(p)) = (opts.resume, &path) {
                    if let Some(cell) = load_checkpoint(p, &hash)? {
                        log::info!("scenario {} replicate {rep}: reused checkpoint", sc.id);
                        return Ok(cell);
                    }
                }
                let cell = run_cell(cfg, sc, *rep)?;
                log::info!("scenario {} replicate {rep}: done", sc.id);
                if let Some(p) = &path {
                    save_checkpoint(p, &cell)?;
                }
                Ok(cell)
            })
            .collect()
    });
    Ok(StudyResults {
        config: cfg.clone(),
        cells: cells.into_iter().collect::<Result<_>>()?,
    })
}

/// Selection frequencies of one tool in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionRow {
    pub scenario: u32,
    pub models: Vec<ModelId>,
    pub counts: Vec<usize>,
    /// Complete replicates in which the tool selected a model.
    pub denominator: usize,
    pub ties: usize,
}

impl ProportionRow {
    pub fn proportions(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.denominator as f64).collect()
    }

    pub fn proportion(&self, m: ModelId) -> f64 {
        self.models
            .iter()
            .position(|&x| x == m)
            .map(|i| self.counts[i] as f64 / self.denominator as f64)
            .unwrap_or(0.0)
    }
}

impl StudyResults {
    pub fn failures(&self) -> Vec<(u32, usize, String)> {
        self.cells
            .iter()
            .filter_map(|c| match &c.status {
                CellStatus::Failed { reason } => Some((c.scenario, c.replicate, reason.clone())),
                CellStatus::Complete => None,
            })
            .collect()
    }

    fn complete(&self, scenario: u32) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.scenario == scenario && c.is_complete())
    }

    /// Row-stochastic selection table, one row per scenario.
    pub fn selection_proportions(&self, tool: &ToolId) -> Vec<ProportionRow> {
        self.config
            .scenarios
            .iter()
            .map(|&sc| {
                let models = self.config.models.clone();
                let mut counts = vec![0; models.len()];
                let (mut denominator, mut ties) = (0, 0);
                for cell in self.complete(sc) {
                    if let Some(Some(m)) = cell.selection(tool).map(|s| s.selected) {
                        let i = models.iter().position(|&x| x == m).expect("selected model is listed");
                        counts[i] += 1;
                        denominator += 1;
                        ties += cell.selection(tool).is_some_and(|s| s.tie) as usize;
                    }
                }
                ProportionRow {
                    scenario: sc,
                    models,
                    counts,
                    denominator,
                    ties,
                }
            })
            .collect()
    }

    /// Average RMSE of a tracked series; `None` when the parameter is not
    /// part of the model or no replicate completed.
    pub fn average_rmse(&self, scenario: u32, model: ModelId, label: &str) -> Option<f64> {
        let mses: Vec<f64> = self
            .complete(scenario)
            .filter_map(|c| c.model(model).and_then(|m| m.mse_of(label)))
            .collect();
        average_rmse_of(&mses)
    }

    /// Mean over complete replicates of a pairwise posterior correlation.
    pub fn mean_correlation(&self, scenario: u32, model: ModelId, a: &str, b: &str) -> Option<f64> {
        let rs: Vec<f64> = self
            .complete(scenario)
            .filter_map(|c| c.model(model).and_then(|m| m.correlations.get(a, b)))
            .collect();
        (!rs.is_empty()).then(|| crate::numeric::mean(&rs))
    }
}
