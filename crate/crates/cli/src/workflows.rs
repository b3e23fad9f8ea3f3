//! The batch workflows and their file outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use discrim::abc::{build_reference_table, ReferenceTable};
use discrim::classify::forest::{train_forest, ForestConfig};
use discrim::classify::{misclassification_matrix, MisclassificationMatrix};
use discrim::design::{Design, DesignRecord, DesignSpace, PriorModelProbabilities};
use discrim::likelihood::{EpiPosterior, LogisticPosterior};
use discrim::loss::{EstimatorMethod, LossEstimate, LossEvaluator, PosteriorOracle};
use discrim::models::{generate_labeled_set, ModelFamily, SizeSpec};
use discrim::optimize::{multi_start_search, EstimatorObjective, SearchResult};
use discrim::{Dataset, Error, Result, RngStream};

use crate::config::{RunConfig, Workflow};
use crate::family::FamilyPreset;
use crate::table::{fmt_design, fmt_f64, Table};

/// Root stream children used by the workflows.
const SEARCH_STREAM: u64 = 0;
const TABLE_STREAM: u64 = 1;
const SWEEP_STREAM: u64 = 2;
const EVALUATE_STREAM: u64 = 3;
const VALIDATE_STREAM: u64 = 4;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub run_id: String,
    pub workflow: Workflow,
    pub dir: PathBuf,
    pub summary: Value,
    /// Paths relative to `dir`.
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

impl Report {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }
}

struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    fn create(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(root.join("tables"))?;
        std::fs::create_dir_all(root.join("logs"))?;
        Ok(Self { root, files: Vec::new() })
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<()> {
        std::fs::write(self.root.join(rel), text)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn table(&mut self, rel: &str, t: &Table) -> Result<()> {
        self.write(rel, &t.to_csv())
    }
}

/// Runs the configured workflow inside a pool capped at the thread budget.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.workflow {
        Workflow::Search => run_search(cfg),
        Workflow::Evaluate => run_evaluate(cfg),
        Workflow::Sweep | Workflow::AbcSweep => run_sweep(cfg),
        Workflow::Validate | Workflow::ValidateLikelihood => run_validate(cfg, &cfg.design_list()),
    })
}

fn start(cfg: &RunConfig) -> Result<(RunDir, String)> {
    let run_id = cfg.run_id();
    let mut dir = RunDir::create(cfg.out.join(&run_id))?;
    let echo = serde_json::to_string_pretty(cfg)?;
    dir.write("config.json", &(echo + "\n"))?;
    Ok((dir, run_id))
}

fn finish(cfg: &RunConfig, mut dir: RunDir, run_id: String, summary: Value, t0: Instant) -> Result<Report> {
    let wall = t0.elapsed().as_secs_f64();
    dir.write("logs/timings.json", &format!("{}\n", json!({ "wall_time_s": wall })))?;
    let mut files = dir.files.clone();
    files.push("result.json".into());
    let record = json!({
        "run_id": run_id,
        "workflow": cfg.workflow,
        "summary": summary,
        "files": files,
    });
    std::fs::write(dir.root.join("result.json"), format!("{record}\n"))?;
    Ok(Report { run_id, workflow: cfg.workflow, dir: dir.root, summary, files, wall_time_s: wall })
}

fn root_stream(cfg: &RunConfig) -> RngStream {
    RngStream::new(cfg.seed)
}

/// Simulates the ABC reference table on the first group's grid, or loads the configured one.
pub fn reference_table(preset: &FamilyPreset, space: &DesignSpace, cfg: &RunConfig) -> Result<ReferenceTable> {
    let FamilyPreset::Epi(family) = preset else {
        return Err(Error::Config("abc losses are only available for the epidemic families".into()));
    };
    if let Some(path) = &cfg.abc_table {
        return ReferenceTable::load(path);
    }
    if space.groups.len() != 1 {
        return Err(Error::Config("abc losses support one realisation per design".into()));
    }
    build_reference_table(family, &space.groups[0].grid, cfg.sizes.abc_rows, root_stream(cfg).split(TABLE_STREAM))
}

fn needs_table(cfg: &RunConfig) -> bool {
    cfg.workflow == Workflow::AbcSweep || cfg.methods().contains(&EstimatorMethod::Abc)
}

fn maybe_table(preset: &FamilyPreset, space: &DesignSpace, cfg: &RunConfig, dir: &mut RunDir) -> Result<Option<ReferenceTable>> {
    if !needs_table(cfg) {
        return Ok(None);
    }
    let table = reference_table(preset, space, cfg)?;
    if cfg.save_abc_table {
        table.save(&dir.root.join("tables/reference.bin"))?;
        dir.files.push("tables/reference.bin".into());
    }
    Ok(Some(table))
}

fn search_summary(res: &SearchResult, space: &DesignSpace, seed: u64) -> Value {
    json!({
        "design": res.design,
        "design_record": DesignRecord::new(&res.design, space, seed),
        "min_average_loss": res.min_average_loss,
        "best_restart": res.best_restart,
        "total_evaluations": res.total_evaluations,
        "restarts": res.runs.iter().map(|r| json!({
            "restart": r.restart,
            "init": r.init,
            "init_loss": r.init_loss,
            "design": r.design,
            "min_average_loss": r.min_average_loss,
            "terminal_averages": r.terminal_averages,
            "sweeps": r.sweeps,
            "n_evaluations": r.n_evaluations,
            "warnings": r.warnings,
        })).collect::<Vec<_>>(),
    })
}

pub fn run_search(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let preset = cfg.family_preset()?;
    let space = cfg.design_space()?;
    let (mut dir, run_id) = start(cfg)?;
    let table = maybe_table(&preset, &space, cfg, &mut dir)?;
    let evaluator = preset.evaluator(cfg.method, cfg, table.as_ref())?;
    let objective = EstimatorObjective(evaluator.as_ref());
    let res = multi_start_search(&objective, &space, &cfg.search_config(), root_stream(cfg).split(SEARCH_STREAM))?;

    let mut log = String::new();
    for r in &res.runs {
        for rec in &r.log {
            log.push_str(&serde_json::to_string(rec)?);
            log.push('\n');
        }
    }
    let summary = search_summary(&res, &space, cfg.seed);
    log.push_str(&serde_json::to_string(&json!({ "search_result": summary }))?);
    log.push('\n');
    dir.write("logs/run.jsonl", &log)?;
    dir.write("design.jsonl", &(DesignRecord::new(&res.design, &space, cfg.seed).to_line() + "\n"))?;

    let mut t = Table::new(&["restart", "init", "init_loss", "design", "min_average_loss", "sweeps", "n_evaluations"]);
    for r in &res.runs {
        t.push(vec![
            r.restart.to_string(),
            fmt_design(&r.init),
            fmt_f64(r.init_loss),
            fmt_design(&r.design),
            fmt_f64(r.min_average_loss),
            r.sweeps.to_string(),
            r.n_evaluations.to_string(),
        ]);
    }
    dir.table("tables/restarts.csv", &t)?;
    finish(cfg, dir, run_id, summary, t0)
}

pub fn run_evaluate(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let preset = cfg.family_preset()?;
    let space = cfg.design_space()?;
    let (mut dir, run_id) = start(cfg)?;
    let table = maybe_table(&preset, &space, cfg, &mut dir)?;
    let designs = cfg.design_list();
    let mut t = Table::new(&["design_index", "design", "method", "loss", "repeat", "value", "se", "shortfall"]);
    let mut summary = Vec::new();
    for method in cfg.methods() {
        let evaluator = preset.evaluator(method, cfg, table.as_ref())?;
        for (i, d) in designs.iter().enumerate() {
            let mut values = Vec::new();
            for rep in 0..cfg.sizes.repeats {
                let stream = root_stream(cfg).path(&[EVALUATE_STREAM, i as u64, rep as u64]);
                let e = evaluator.evaluate(d, stream)?;
                t.push(vec![
                    i.to_string(),
                    fmt_design(d),
                    method.to_string(),
                    cfg.loss.to_string(),
                    rep.to_string(),
                    fmt_f64(e.value),
                    fmt_f64(e.se),
                    e.shortfall.to_string(),
                ]);
                values.push(e.value);
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            summary.push(json!({ "design_index": i, "design": d, "method": method, "mean": mean }));
        }
    }
    dir.table("tables/evaluate.csv", &t)?;
    finish(cfg, dir, run_id, json!({ "estimates": summary }), t0)
}

/// Loss at every grid value of a one-coordinate space. Every point shares
/// the same stream so the curve uses common random numbers.
pub fn sweep_curve(evaluator: &dyn LossEvaluator, space: &DesignSpace, stream: RngStream) -> Result<Vec<LossEstimate>> {
    if space.n_coordinates() != 1 {
        return Err(Error::Config("sweeps trace one coordinate".into()));
    }
    let group = space.groups.iter().position(|g| g.size == 1).expect("one coordinate");
    space.groups[group]
        .grid
        .values()
        .iter()
        .map(|&x| {
            let blocks = space.groups.iter().enumerate().map(|(g, _)| if g == group { vec![x] } else { Vec::new() }).collect();
            evaluator.evaluate(&Design::new(blocks), stream)
        })
        .collect()
}

/// Grid value with the smallest loss; the first one on ties.
pub fn curve_argmin(curve: &[LossEstimate]) -> Option<(f64, f64)> {
    curve
        .iter()
        .map(|e| (e.design.coordinates().next().unwrap_or(f64::NAN), e.value))
        .fold(None, |best: Option<(f64, f64)>, (x, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((x, v)),
        })
}

pub fn run_sweep(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let preset = cfg.family_preset()?;
    let space = cfg.design_space()?;
    let (mut dir, run_id) = start(cfg)?;
    let mut methods = cfg.methods();
    if cfg.workflow == Workflow::AbcSweep && !methods.contains(&EstimatorMethod::Abc) {
        methods.insert(0, EstimatorMethod::Abc);
    }
    let table = maybe_table(&preset, &space, cfg, &mut dir)?;
    let mut t = Table::new(&["method", "loss", "x", "value", "se"]);
    let mut summary = Vec::new();
    for (i, &method) in methods.iter().enumerate() {
        let evaluator = preset.evaluator(method, cfg, table.as_ref())?;
        let curve = sweep_curve(evaluator.as_ref(), &space, root_stream(cfg).path(&[SWEEP_STREAM, i as u64]))?;
        for e in &curve {
            let x = e.design.coordinates().next().unwrap_or(f64::NAN);
            t.push(vec![method.to_string(), cfg.loss.to_string(), fmt_f64(x), fmt_f64(e.value), fmt_f64(e.se)]);
        }
        let (x, v) = curve_argmin(&curve).expect("non-empty grid");
        summary.push(json!({ "method": method, "argmin": x, "min": v }));
    }
    dir.table("tables/sweep.csv", &t)?;
    finish(cfg, dir, run_id, json!({ "curves": summary }), t0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ForestValidation {
    /// Prior-weighted misclassification rate on the test set.
    pub error: f64,
    pub se: f64,
    pub matrix: MisclassificationMatrix,
}

/// Trains a fresh forest on `j_train` rows per model (`stream.split(0)`, forest
/// `stream.split(2)`) and scores it on `j_test` fresh rows per model (`stream.split(1)`).
pub fn forest_validation(
    family: &dyn ModelFamily,
    design: &Design,
    j_train: usize,
    j_test: usize,
    n_trees: usize,
    priors: &PriorModelProbabilities,
    stream: RngStream,
) -> Result<ForestValidation> {
    let k = family.n_models();
    let train: Dataset = generate_labeled_set(family, design, SizeSpec::Stratified(j_train), priors, stream.split(0))?;
    let test: Dataset = generate_labeled_set(family, design, SizeSpec::Stratified(j_test), priors, stream.split(1))?;
    let forest = train_forest(&train, &ForestConfig::with_trees(n_trees).with_priors(priors.clone()), stream.split(2))?;
    let predicted = (0..test.len())
        .into_par_iter()
        .map(|i| forest.predict(test.row(i)).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let matrix = misclassification_matrix(test.labels(), &predicted, k)?;
    let (error, se) = weighted_error(&matrix, priors, j_test);
    Ok(ForestValidation { error, se, matrix })
}

fn weighted_error(matrix: &MisclassificationMatrix, priors: &PriorModelProbabilities, n: usize) -> (f64, f64) {
    let mut error = 0.0;
    let mut var = 0.0;
    for (i, &p) in priors.as_slice().iter().enumerate() {
        let e = 1.0 - matrix.rates[i][i];
        error += p * e;
        var += p * p * e * (1.0 - e) / n as f64;
    }
    (error, var.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct PosteriorRow {
    pub true_model: usize,
    pub p_true: f64,
    pub map_model: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LikelihoodValidation {
    /// Prior-weighted error of the maximum-posterior classifier.
    pub bayes_error: f64,
    pub se: f64,
    pub mean_p_true: f64,
    pub rows: Vec<PosteriorRow>,
}

/// Posterior probability of the true model for `j` prior-predictive datasets per model.
pub fn likelihood_validation(preset: &FamilyPreset, design: &Design, cfg: &RunConfig, j: usize, stream: RngStream) -> Result<LikelihoodValidation> {
    preset.check_method(EstimatorMethod::BayesOracle)?;
    let family = preset.as_dyn();
    let priors = family.default_priors();
    let data: Dataset = generate_labeled_set(family.as_ref(), design, SizeSpec::Stratified(j), &priors, stream.split(0))?;
    let oracle: Box<dyn PosteriorOracle + '_> = match preset {
        FamilyPreset::Epi(f) => Box::new(EpiPosterior::new(f, design, FamilyPreset::epi_evidence(cfg))?),
        FamilyPreset::Logistic(f) => {
            Box::new(LogisticPosterior::new(f.structure, design, cfg.sizes.is_draws, priors.clone(), stream.split(1))?)
        }
        _ => unreachable!("rejected by check_method"),
    };
    let rows = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let p = oracle.posterior(data.row(i))?;
            let truth = data.label(i);
            let map = discrim::scalar::argmax(&p);
            Ok(PosteriorRow { true_model: truth, p_true: p[truth], map_model: map })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<usize> = rows.iter().map(|r| r.true_model).collect();
    let map: Vec<usize> = rows.iter().map(|r| r.map_model).collect();
    let matrix = misclassification_matrix(&truth, &map, family.n_models())?;
    let (bayes_error, se) = weighted_error(&matrix, &priors, j);
    let mut mean_p_true = 0.0;
    for (m, &p) in priors.as_slice().iter().enumerate() {
        let mine: Vec<f64> = rows.iter().filter(|r| r.true_model == m).map(|r| r.p_true).collect();
        mean_p_true += p * mine.iter().sum::<f64>() / mine.len() as f64;
    }
    Ok(LikelihoodValidation { bayes_error, se, mean_p_true, rows })
}

pub fn run_validate(cfg: &RunConfig, designs: &[Design]) -> Result<Report> {
    cfg.validate()?;
    if designs.is_empty() {
        return Err(Error::Config("validation needs at least one design".into()));
    }
    let t0 = Instant::now();
    let preset = cfg.family_preset()?;
    let with_likelihood = cfg.workflow == Workflow::ValidateLikelihood;
    if with_likelihood {
        preset.check_method(EstimatorMethod::BayesOracle)?;
    }
    let family = preset.as_dyn();
    let priors = family.default_priors();
    let names = family.model_names();
    let (mut dir, run_id) = start(cfg)?;
    let s = &cfg.sizes;
    let mut t = Table::new(&["design_index", "design", "error", "se"]);
    let mut lt = Table::new(&["design_index", "design", "bayes_error", "se", "mean_p_true"]);
    let mut summary = Vec::new();
    for (i, d) in designs.iter().enumerate() {
        let stream = root_stream(cfg).path(&[VALIDATE_STREAM, i as u64]);
        let v = forest_validation(family.as_ref(), d, s.validate_train, s.validate_test, s.validate_trees, &priors, stream)?;
        t.push(vec![i.to_string(), fmt_design(d), fmt_f64(v.error), fmt_f64(v.se)]);
        let mut buf = Vec::new();
        v.matrix.write_csv(&mut buf, &names)?;
        dir.write(&format!("tables/confusion-{i}.csv"), &String::from_utf8(buf).expect("utf8"))?;
        let mut entry = json!({ "design_index": i, "design": d, "error": v.error, "se": v.se, "matrix": v.matrix.rates });
        if with_likelihood {
            let lv = likelihood_validation(&preset, d, cfg, s.likelihood_datasets, stream.split(3))?;
            lt.push(vec![i.to_string(), fmt_design(d), fmt_f64(lv.bayes_error), fmt_f64(lv.se), fmt_f64(lv.mean_p_true)]);
            let mut pt = Table::new(&["row", "true_model", "p_true", "map_model"]);
            for (r, row) in lv.rows.iter().enumerate() {
                pt.push(vec![r.to_string(), row.true_model.to_string(), fmt_f64(row.p_true), row.map_model.to_string()]);
            }
            dir.table(&format!("tables/posterior-{i}.csv"), &pt)?;
            entry["bayes_error"] = json!(lv.bayes_error);
            entry["mean_p_true"] = json!(lv.mean_p_true);
        }
        summary.push(entry);
    }
    dir.table("tables/validation.csv", &t)?;
    if with_likelihood {
        dir.table("tables/likelihood.csv", &lt)?;
    }
    finish(cfg, dir, run_id, json!({ "designs": summary }), t0)
}

/// Designs stored in a search result directory.
pub fn designs_from_result(dir: &Path) -> Result<Vec<Design>> {
    let text = std::fs::read_to_string(dir.join("design.jsonl"))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| DesignRecord::from_line(l).map(|r| Design::new(r.blocks))).collect()
}
