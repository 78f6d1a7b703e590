use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use secr_core::io::{
    csv_float, dataset_hash, read_dataset, schema_line, sha256_file, sha256_hex, write_dataset,
    write_truth, FileDigest, RunManifest,
};
use secr_core::mcmc::{fit as fit_chain, read_chain, write_chain, McmcConfig};
use secr_core::numeric::mix_seed;
use secr_core::simulate::{scaled_scenarios, scenario_table, simulate_dataset};
use secr_core::study::output::{read_table, summarise_selections, write_tables, RMSE, SELECTIONS};
use secr_core::study::{run_study, score_chain, select as pick, ScenarioSet, StudyConfig, StudyOptions, ToolId};
use secr_core::{ModelId, PriorSpec};

use crate::config::{self, SimulateConfig};
use crate::{FitArgs, ReportArgs, SelectArgs, SimulateArgs, StudyArgs};

pub const DATASET_FILE: &str = "dataset.txt";
pub const TRUTH_FILE: &str = "truth.json";
pub const CHAIN_FILE: &str = "chain.tsv";
pub const STUDY_CONFIG_FILE: &str = "study.toml";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(secr_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<secr_core::Error> for CliError {
    fn from(e: secr_core::Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Seeds stay below 2^53 so every config format stores them exactly.
fn seed_or_generate(seed: Option<u64>, what: &str) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>() >> 11;
        eprintln!("{what}: no seed given, using {s}");
        s
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

fn finish(mut manifest: RunManifest, start: Instant, dir: &Path) -> Result<()> {
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    if manifest.status == "running" {
        manifest.status = "complete".into();
    }
    manifest.write(dir)?;
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let (mut cfg, inputs) = match &a.config {
        Some(p) => {
            let (path, text) = config::read(p)?;
            let cfg: SimulateConfig = toml::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (cfg, vec![digest(&path)?])
        }
        None => {
            let id = a
                .scenario
                .ok_or_else(|| CliError::Usage("give --config or --scenario".into()))?;
            (SimulateConfig::preset(a.scenario_set.into(), id), Vec::new())
        }
    };
    if a.config.is_some() && a.scenario.is_some() {
        cfg.scenario = a.scenario.unwrap();
    }
    // Validate everything before drawing a single number.
    let design = cfg.design.build()?;
    let table = match cfg.scenario_set {
        ScenarioSet::Scaled => scaled_scenarios(),
        ScenarioSet::Standard => scenario_table(),
    };
    let mut scenario = *table
        .iter()
        .find(|s| s.id == cfg.scenario)
        .ok_or_else(|| CliError::Usage(format!("no scenario {} in the {:?} set", cfg.scenario, cfg.scenario_set)))?;
    if let Some(m) = cfg.m {
        scenario.m = m;
    }
    scenario.validate()?;
    let seed = seed_or_generate(a.seed.or(cfg.seed), "simulate");
    cfg.seed = Some(seed);

    let (data, truth) = simulate_dataset(&scenario, &design, seed, cfg.sex_reveal)?;
    create_dir(&a.out)?;
    write_dataset(&a.out.join(DATASET_FILE), &data)?;
    write_truth(&a.out.join(TRUTH_FILE), &truth)?;
    let text = toml::to_string(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new("simulate", sha256_hex(text.as_bytes()), vec![seed]);
    manifest.inputs = inputs;
    manifest.outputs = vec![DATASET_FILE.into(), TRUTH_FILE.into()];
    manifest.dataset_hash = Some(dataset_hash(&data));
    println!(
        "simulated scenario {}: N = {}, {} detector-1 and {} detector-2 rows captured",
        scenario.id,
        truth.n,
        data.n_captured1(),
        data.n_captured2()
    );
    finish(manifest, start, &a.out)
}

pub fn fit(a: FitArgs) -> Result<()> {
    let start = Instant::now();
    let (mut mcmc, mut inputs) = match &a.config {
        Some(p) => {
            let (path, text) = config::read(p)?;
            let cfg: McmcConfig = toml::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (cfg, vec![digest(&path)?])
        }
        None => (McmcConfig::default(), Vec::new()),
    };
    if let Some(n) = a.iterations {
        mcmc.n_iter = n;
    }
    if let Some(b) = a.burn_in {
        mcmc.burn_in = b;
    }
    if let Some(t) = a.thin {
        mcmc.thin = t;
    }
    mcmc.validate()?;
    let data = read_dataset(&a.data)?;
    inputs.push(digest(&a.data)?);
    let hash = dataset_hash(&data);
    let mut notes = Vec::new();
    let data = if !a.model.has_sex() && data.has_sex_labels() {
        let msg = format!("{} has no sex parameter; sex labels in the dataset are ignored", a.model);
        log::warn!("{msg}");
        notes.push(msg);
        data.without_sex()
    } else {
        data
    };
    mcmc.seed = seed_or_generate(a.seed, "fit");

    let prior = PriorSpec::for_statespace(data.statespace());
    let chain = fit_chain(a.model, &data, &prior, &mcmc)?;
    create_dir(&a.out)?;
    write_chain(&a.out.join(CHAIN_FILE), &chain)?;
    let config_json = serde_json::to_string(&mcmc).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new("fit", sha256_hex(config_json.as_bytes()), vec![mcmc.seed]);
    manifest.inputs = inputs;
    manifest.outputs = vec![CHAIN_FILE.into()];
    manifest.dataset_hash = Some(hash);
    manifest.model = Some(a.model.to_string());
    manifest.notes = notes;
    println!("{}: {} draws written", a.model, chain.len());
    finish(manifest, start, &a.out)
}

fn parse_tools(list: &str) -> Result<Vec<ToolId>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(ToolId::all());
    }
    let mut out = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let t: ToolId = item.parse().map_err(|e: secr_core::Error| CliError::Usage(e.to_string()))?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no tools requested".into()));
    }
    Ok(out)
}

/// Chain file and the manifest of the fit that wrote it.
fn locate_chain(p: &Path) -> Result<(PathBuf, RunManifest)> {
    let (file, dir) = if p.is_dir() {
        (p.join(CHAIN_FILE), p.to_path_buf())
    } else {
        (p.to_path_buf(), p.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let manifest = RunManifest::read(&dir)
        .map_err(|e| CliError::Data(format!("chain {} has no readable fit manifest: {e}", p.display())))?;
    Ok((file, manifest))
}

pub fn select(a: SelectArgs) -> Result<()> {
    let start = Instant::now();
    let tools = parse_tools(&a.tools)?;
    if a.ppl_thin == 0 {
        return Err(CliError::Usage("--ppl-thin must be at least 1".into()));
    }
    let data = read_dataset(&a.data)?;
    let hash = dataset_hash(&data);
    let mut inputs = vec![digest(&a.data)?];

    let mut chains = Vec::new();
    for p in &a.chains {
        let (file, manifest) = locate_chain(p)?;
        if manifest.dataset_hash.as_deref() != Some(hash.as_str()) {
            return Err(CliError::Data(format!(
                "chain {} was fitted to a different dataset than {}",
                p.display(),
                a.data.display()
            )));
        }
        let chain = read_chain(&file)?;
        inputs.push(digest(&file)?);
        chains.push(chain);
    }
    chains.sort_by_key(|c| c.model);
    if chains.windows(2).any(|w| w[0].model == w[1].model) {
        return Err(CliError::Usage("two chains for the same model".into()));
    }
    let seed = seed_or_generate(a.seed, "select");
    let prior = PriorSpec::for_statespace(data.statespace());
    let models: Vec<ModelId> = chains.iter().map(|c| c.model).collect();

    let mut scored = Vec::new();
    for chain in &chains {
        // M4 ignores sex labels, as when it was fitted.
        let d = if chain.model.has_sex() { data.clone() } else { data.without_sex() };
        let ppl_seed = mix_seed(seed, chain.model.index() as u64);
        scored.push(score_chain(chain, &d, &prior, &tools, ppl_seed, a.ppl_thin)?);
    }

    let score = |k: usize, tool: &ToolId| -> Option<f64> {
        let s = &scored[k];
        match tool {
            ToolId::Marginal { .. } => s.marglik.iter().find(|r| r.tool == *tool).and_then(|r| r.value),
            ToolId::Criterion(c) => s.criteria.iter().find(|r| r.criterion == *c).and_then(|r| r.value),
        }
    };
    let score_cols: Vec<String> = models.iter().map(|m| format!("score_{m}")).collect();
    let mut sel = format!("{}\ntool,selected,tie,{}\n", schema_line("selection"), score_cols.join(","));
    for tool in &tools {
        let scores: Vec<Option<f64>> = (0..models.len()).map(|k| score(k, tool)).collect();
        let s = pick(*tool, &models, &scores);
        let chosen = s.selected.map(|m| m.to_string()).unwrap_or_else(|| "NA".into());
        let cells: Vec<String> = scores.iter().map(|v| v.map(csv_float).unwrap_or_else(|| "NA".into())).collect();
        let _ = writeln!(sel, "{tool},{chosen},{},{}", s.tie, cells.join(","));
        println!("{tool:<16} {chosen}{}", if s.tie { " (tie)" } else { "" });
    }

    let na = |v: Option<f64>| v.map(csv_float).unwrap_or_else(|| "NA".into());
    let mut marg = format!(
        "{}\nmodel,method,tuning,log_marginal,mc_se,dropped,unreliable\n",
        schema_line("chain_marglik")
    );
    let mut crit = format!(
        "{}\nmodel,criterion,value,fit_term,penalty,thin,seed\n",
        schema_line("chain_criteria")
    );
    let mut notes = Vec::new();
    for (m, s) in models.iter().zip(&scored) {
        for r in &s.marglik {
            let ToolId::Marginal { method, tuning } = r.tool else { continue };
            let tuning = tuning.map(|t| t.label()).unwrap_or_else(|| "none".into());
            let _ = writeln!(
                marg,
                "{m},{method},{tuning},{},{},{},{}",
                na(r.value),
                na(r.mc_se),
                r.dropped,
                r.unreliable
            );
            if let Some(e) = &r.error {
                notes.push(format!("{m} {}: {e}", r.tool));
            }
        }
        for c in &s.criteria {
            let seed = c.seed.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                crit,
                "{m},{},{},{},{},{},{seed}",
                c.criterion,
                na(c.value),
                na(c.fit_term),
                na(c.penalty),
                c.thin
            );
        }
        if let Some(e) = &s.criteria_error {
            notes.push(format!("{m} criteria: {e}"));
        }
    }
    for n in &notes {
        log::warn!("{n}");
    }

    create_dir(&a.out)?;
    write_text(&a.out.join("selection.csv"), &sel)?;
    write_text(&a.out.join("marglik.csv"), &marg)?;
    write_text(&a.out.join("criteria.csv"), &crit)?;
    let tool_list: Vec<String> = tools.iter().map(|t| t.label()).collect();
    let mut manifest = RunManifest::new("select", sha256_hex(tool_list.join(",").as_bytes()), vec![seed]);
    manifest.inputs = inputs;
    manifest.outputs = vec!["selection.csv".into(), "marglik.csv".into(), "criteria.csv".into()];
    manifest.dataset_hash = Some(hash);
    manifest.notes = notes;
    finish(manifest, start, &a.out)
}

pub fn study(a: StudyArgs) -> Result<()> {
    let start = Instant::now();
    let (mut cfg, inputs) = match (&a.config, a.preset) {
        (Some(p), _) => {
            let (path, text) = config::read(p)?;
            let cfg: StudyConfig =
                toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (cfg, vec![digest(&path)?])
        }
        (None, Some(preset)) => {
            let seed = seed_or_generate(a.seed, "study");
            let cfg = match ScenarioSet::from(preset) {
                ScenarioSet::Scaled => StudyConfig::scaled(seed),
                ScenarioSet::Standard => StudyConfig::standard(seed),
            };
            (cfg, Vec::new())
        }
        (None, None) => return Err(CliError::Usage("give --config or --preset".into())),
    };
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    cfg.validate()?;

    create_dir(&a.out)?;
    let config_path = a.out.join(STUDY_CONFIG_FILE);
    if a.resume && config_path.exists() {
        let previous = fs::read_to_string(&config_path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", config_path.display())))?;
        if previous != cfg.to_toml() {
            return Err(CliError::Data(format!(
                "{} holds a different study configuration; refusing to resume",
                a.out.display()
            )));
        }
    }
    write_text(&config_path, &cfg.to_toml())?;
    let opts = StudyOptions {
        workers: a.workers,
        checkpoint_dir: Some(a.out.join("checkpoints")),
        resume: a.resume,
    };
    let results = run_study(&cfg, &opts)?;
    let mut outputs = write_tables(&results, &a.out)?;
    outputs.push(STUDY_CONFIG_FILE.into());

    let mut manifest = RunManifest::new("study", cfg.hash(), vec![cfg.master_seed]);
    manifest.inputs = inputs;
    manifest.outputs = outputs;
    let failures = results.failures();
    for (sc, rep, reason) in &failures {
        manifest.notes.push(format!("scenario {sc} replicate {rep} incomplete: {reason}"));
    }
    if !failures.is_empty() {
        manifest.status = format!("complete with {} failed cells", failures.len());
        for n in &manifest.notes {
            eprintln!("{n}");
        }
    }
    println!(
        "study finished: {} cells, {} failed, tables in {}",
        results.cells.len(),
        failures.len(),
        a.out.display()
    );
    finish(manifest, start, &a.out)
}

pub fn report(a: ReportArgs) -> Result<()> {
    let sel_path = a.results.join(format!("{SELECTIONS}.csv"));
    if !sel_path.exists() {
        return Err(CliError::Data(format!(
            "{} holds no study results (missing {SELECTIONS}.csv)",
            a.results.display()
        )));
    }
    let summary = summarise_selections(&sel_path)?;
    if summary.rows.is_empty() {
        return Err(CliError::Data(format!("{} has no completed cells", sel_path.display())));
    }
    let wanted = a.tools.as_deref().map(parse_tools).transpose()?;
    let mut tools: Vec<String> = Vec::new();
    for (t, ..) in &summary.rows {
        let keep = wanted
            .as_ref()
            .map_or(true, |w| w.iter().any(|x| x.label() == *t));
        if keep && !tools.contains(t) {
            tools.push(t.clone());
        }
    }

    let mut out = String::new();
    let head: Vec<String> = summary.models.iter().map(|m| format!("{:>6}", m.to_string())).collect();
    let _ = writeln!(out, "Selection proportions (rows: scenario; n = replicates with a choice)");
    for tool in &tools {
        let _ = writeln!(out, "\n{tool}\n  scenario {}      n", head.join(" "));
        for (_, sc, counts, n) in summary.rows.iter().filter(|r| r.0 == *tool) {
            let props: Vec<String> = counts
                .iter()
                .map(|&c| if *n == 0 { format!("{:>6}", "NA") } else { format!("{:>6.2}", c as f64 / *n as f64) })
                .collect();
            let _ = writeln!(out, "  {sc:>8} {} {n:>6}", props.join(" "));
        }
    }

    let rmse_path = a.results.join(format!("{RMSE}.csv"));
    if rmse_path.exists() {
        let (_, rows) = read_table(&rmse_path, RMSE)?;
        let _ = writeln!(out, "\nAverage RMSE of N\n  scenario  model      rmse");
        for r in rows.iter().filter(|r| r[2] == "N") {
            let rmse = r[3].parse::<f64>().map_or_else(|_| r[3].clone(), |v| format!("{v:.3}"));
            let _ = writeln!(out, "  {:>8} {:>6} {:>9}", r[0], r[1], rmse);
        }
    }

    if let Ok(manifest) = RunManifest::read(&a.results) {
        if !manifest.notes.is_empty() {
            let _ = writeln!(out, "\nIncomplete cells");
            for n in &manifest.notes {
                let _ = writeln!(out, "  {n}");
            }
        }
    }
    print!("{out}");
    Ok(())
}
