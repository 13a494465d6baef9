use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;

use hetconv::bench::{run_scaling, ScaleSpec};
use hetconv::datagen::{generate as gen, with_random_splits, GenSpec};
use hetconv::hin::{io, validate_graph, HinGraph};
use hetconv::interpret::{
    per_object_scores, score_meta_paths, summarize_attention, AttentionSummary, ExplainReport,
};
use hetconv::io_util::{write_atomic, write_json};
use hetconv::model::checkpoint;
use hetconv::model::eval_forward;
use hetconv::model::spectral::check_graph_pair;
use hetconv::numerics::xavier_uniform;
use hetconv::training::{self, fit_with, gradcheck_model, init_params, TrainConfig};
use hetconv::{rng, Schema};

use crate::config::RunConfig;
use crate::{Code, Failure};

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::new(Code::Usage, e)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(usage)
}

fn log_config<T: serde::Serialize>(what: &str, value: &T) {
    if let Ok(json) = serde_json::to_string(value) {
        log::info!("resolved {what} config: {json}");
    }
}

/// Loads and validates a graph directory.
fn load_graph(dir: &Path) -> Result<HinGraph, Failure> {
    let g = io::load_dir(dir)?;
    Ok(HinGraph::validated(g.into_parts())?)
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(usage)?;
        }
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::new(Code::Check, e))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Graph directory.
    #[arg(long)]
    data: PathBuf,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn train(a: TrainArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    cfg.train.check().map_err(usage)?;
    log_config("train", &cfg.train);
    let g = load_graph(&a.data)?;
    let schema = g.schema();
    if !g.labeled_types().iter().any(|&t| g.split(t).is_some()) {
        let expected: Vec<String> = schema
            .types()
            .iter()
            .map(|t| io::labels_path(&a.data, t).display().to_string())
            .collect();
        return Err(Failure::new(
            Code::Data,
            anyhow!(
                "no labeled type with a split; expected a labels file such as {}",
                expected.join(" or ")
            ),
        ));
    }
    cfg.train.check_for(schema).map_err(usage)?;

    let mut log_lines = String::new();
    let result = fit_with(&g, &cfg.train, |rec| {
        log::info!(
            "epoch {:>3}  loss {:.4}  val micro-F1 {:.4}  macro-F1 {:.4}",
            rec.epoch,
            rec.train_loss,
            rec.val_micro_f1,
            rec.val_macro_f1
        );
        if let Ok(line) = serde_json::to_string(rec) {
            log_lines.push_str(&line);
            log_lines.push('\n');
        }
    })?;
    let targets: Vec<usize> = g
        .labeled_types()
        .into_iter()
        .filter(|&t| g.split(t).is_some())
        .collect();
    let (_, records) = eval_forward(&result.params, &g, Some(&targets))?;
    let summary = summarize_attention(schema, &records);
    let metrics = serde_json::json!({
        "best_epoch": result.best_epoch,
        "epochs": result.log.len(),
        "val": training::evaluate(&result.params, &g, "val")?,
        "test": training::evaluate(&result.params, &g, "test")?,
    });

    fs::create_dir_all(&a.out)
        .map_err(|e| Failure::new(Code::Data, anyhow!("{}: {e}", a.out.display())))?;
    checkpoint::save(&a.out.join("checkpoint"), &result.params, schema)?;
    write_atomic(&a.out.join("train_log.jsonl"), log_lines.as_bytes())?;
    write_json(&a.out.join("attention_summary.json"), &summary)?;
    write_json(&a.out.join("metrics.json"), &metrics)?;
    write_json(&a.out.join("resolved_config.json"), &cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&metrics["test"]).unwrap_or_default()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Split part to score.
    #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
    split: String,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn evaluate(a: EvaluateArgs) -> Outcome {
    let (params, stored) = checkpoint::load(&a.model)?;
    let g = load_graph(&a.data)?;
    checkpoint::ensure_schema(&stored, g.schema())?;
    let metrics = training::evaluate(&params, &g, &a.split)?;
    emit(&to_json(&metrics)?, a.out.as_deref())
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Checkpoint directory; the attention is recomputed on `--data`.
    #[arg(long, conflicts_with = "summary")]
    model: Option<PathBuf>,
    /// Mean attention table (JSON) to score instead of a checkpoint.
    #[arg(long, required_unless_present = "model")]
    summary: Option<PathBuf>,
    /// Graph directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema file, for `--summary` without `--data`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Object type whose meta-paths are ranked.
    #[arg(long)]
    target: String,
    /// Also score every object of the target type.
    #[arg(long, requires = "model")]
    per_object: bool,
    /// Keep only the best K meta-paths.
    #[arg(long)]
    top_k: Option<usize>,
    /// Meta-path prefixes tracked per block for `--per-object`.
    #[arg(long, default_value_t = hetconv::interpret::DEFAULT_BUDGET)]
    budget: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a TSV of meta-paths and their contributors.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

pub fn explain(a: ExplainArgs) -> Outcome {
    let mut report = if let Some(model) = &a.model {
        let data = a
            .data
            .as_ref()
            .ok_or_else(|| usage(anyhow!("--model needs --data")))?;
        let (params, stored) = checkpoint::load(model)?;
        let g = load_graph(data)?;
        checkpoint::ensure_schema(&stored, g.schema())?;
        let target = g.schema().type_id(&a.target)?;
        let (_, records) = eval_forward(&params, &g, Some(&[target]))?;
        let summary = summarize_attention(g.schema(), &records);
        let report = ExplainReport {
            target: a.target.clone(),
            n_layers: summary.n_layers,
            global: score_meta_paths(&summary, g.schema(), &a.target)?,
            per_object: None,
            truncated_mass: None,
        };
        if a.per_object {
            let scores = per_object_scores(&g, &records, &a.target, a.budget)?;
            report.with_per_object(g.schema(), &scores)
        } else {
            report
        }
    } else {
        let path = a
            .summary
            .as_ref()
            .expect("clap requires --summary without --model");
        let schema = match (&a.schema, &a.data) {
            (Some(p), _) => io::load_schema(p)?,
            (None, Some(d)) => io::load_schema(&io::schema_path(d))?,
            (None, None) => return Err(usage(anyhow!("--summary needs --schema or --data"))),
        };
        let text =
            fs::read_to_string(path).map_err(|e| usage(anyhow!("{}: {e}", path.display())))?;
        let summary: AttentionSummary =
            serde_json::from_str(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))?;
        schema.type_id(&a.target)?;
        ExplainReport {
            target: a.target.clone(),
            n_layers: summary.n_layers,
            global: score_meta_paths(&summary, &schema, &a.target)?,
            per_object: None,
            truncated_mass: None,
        }
    };
    if let Some(k) = a.top_k {
        report = report.top_k(k);
    }
    if let Some(tsv) = &a.tsv {
        write_atomic(tsv, report.to_tsv().as_bytes())?;
    }
    emit(&to_json(&report)?, a.out.as_deref())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output graph directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Percentage of labeled objects used for training.
    #[arg(long)]
    train_percent: Option<f64>,
    /// Generate the DBLP-like graph with this many authors, objects and
    /// links instead of the configured spec.
    #[arg(long, num_args = 3, value_names = ["AUTHORS", "OBJECTS", "LINKS"])]
    scale: Option<Vec<usize>>,
}

pub fn generate(a: GenerateArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?.generate;
    if let Some(s) = a.seed {
        cfg.spec.seed = s;
    }
    if let Some(p) = a.train_percent {
        cfg.train_percent = p;
    }
    if let Some(s) = &a.scale {
        cfg.spec = GenSpec::dblp_scaled(s[0], s[1], s[2], cfg.spec.seed).map_err(usage)?;
    }
    cfg.spec.resolve().map_err(usage)?;
    log_config("generate", &cfg);
    let g = gen(&cfg.spec)?;
    let g = with_random_splits(&g, cfg.train_percent, cfg.spec.seed)?;
    io::save_dir(&g, &a.out)?;
    write_json(&a.out.join("generate_config.json"), &cfg)?;
    println!(
        "{} objects, {} links written to {}",
        g.total_objects(),
        g.total_links(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for report.json, report.txt and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kernel threads for the sweep.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Use this many size doublings ending at the largest DBLP scale
    /// instead of the configured scales.
    #[arg(long)]
    doublings: Option<usize>,
}

pub fn benchmark(a: BenchmarkArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?.benchmark;
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(n) = a.doublings {
        cfg.scales = ScaleSpec::doubling(n);
    }
    log_config("benchmark", &cfg);
    let report = run_scaling(&cfg).map_err(usage)?;
    print!("{}", report.to_table());
    if let Some(dir) = &a.out {
        write_json(&dir.join("report.json"), &report)?;
        write_atomic(&dir.join("report.txt"), report.to_table().as_bytes())?;
        write_atomic(&dir.join("report.csv"), report.to_csv().as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Graph directory; a built-in 15-object graph is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Objects kept per type.
    #[arg(long, default_value_t = 8)]
    max_objects: usize,
    /// Feature columns kept per type.
    #[arg(long, default_value_t = 4)]
    max_features: usize,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the mean variant instead of type-level attention.
    #[arg(long)]
    mean_variant: bool,
}

fn small_config(seed: u64, mean_variant: bool) -> TrainConfig {
    TrainConfig {
        widths: vec![4, 3],
        d_a: 3,
        seed,
        mean_variant,
        ..TrainConfig::default()
    }
}

fn small_graph(
    data: Option<&Path>,
    max_objects: usize,
    max_features: usize,
    seed: u64,
) -> Result<HinGraph, Failure> {
    match data {
        Some(d) => Ok(load_graph(d)?.truncated(max_objects, max_features)),
        None => Ok(gen(&GenSpec::tiny(seed))?),
    }
}

pub fn gradcheck(a: GradcheckArgs) -> Outcome {
    let g = small_graph(a.data.as_deref(), a.max_objects, a.max_features, a.seed)?;
    let params = init_params(&g, &small_config(a.seed, a.mean_variant)).map_err(usage)?;
    let report = gradcheck_model(&g, &params, a.h, a.tol)?;
    print!("{}", to_json(&report)?);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::new(
            Code::Check,
            anyhow!(
                "max relative error {:.3e} exceeds {:.1e}",
                report.max_rel_err,
                report.tol
            ),
        ))
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    data: PathBuf,
    /// Objects per type used by the dense equivalence check.
    #[arg(long, default_value_t = 64)]
    max_objects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const NORMALIZATION_TOL: f64 = 1e-9;
const SPECTRAL_TOL: f64 = 1e-10;
const GRADCHECK_TOL: f64 = 1e-4;

fn report_line(ok: bool, name: &str, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

/// Relation pairs `(Ω, Γ)` with both directions present, each listed once.
fn relation_pairs(schema: &Schema) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for &(src, dst) in schema.relations() {
        if schema.relation_id(dst, src).is_some() && src >= dst {
            pairs.push((dst, src));
        }
    }
    pairs
}

pub fn verify(a: VerifyArgs) -> Outcome {
    let g = io::load_dir(&a.data)?;
    let violations = validate_graph(&g);
    if !violations.is_empty() {
        report_line(
            false,
            "validate",
            &format!("{} violation(s)", violations.len()),
        );
        for v in &violations {
            println!("  - {v}");
        }
        return Err(Failure::new(Code::Data, anyhow!("graph failed validation")));
    }
    report_line(true, "validate", "no violations");
    let schema = g.schema().clone();
    let mut failed = Vec::new();

    let mut worst: f64 = 0.0;
    for r in 0..schema.relations().len() {
        let a_hat = g.normalized(r).matrix();
        for (i, s) in a_hat.row_sums().into_iter().enumerate() {
            if a_hat.row(i).0.is_empty() {
                continue;
            }
            worst = worst.max((s - 1.0).abs());
        }
    }
    let ok = worst <= NORMALIZATION_TOL;
    report_line(
        ok,
        "normalization",
        &format!("max |row sum - 1| = {worst:.3e} (tol {NORMALIZATION_TOL:.0e})"),
    );
    if !ok {
        failed.push("normalization");
    }

    let small = g.truncated(a.max_objects, usize::MAX);
    let mut rng = rng::stream(a.seed, rng::ids::INIT);
    for (o, gm) in relation_pairs(&schema) {
        let d = small.features(o).cols().max(small.features(gm).cols());
        let theta0 = xavier_uniform(d, 8, &mut rng);
        let theta1 = xavier_uniform(d, 8, &mut rng);
        let (on, gn) = (schema.type_name(o), schema.type_name(gm));
        let dev = check_graph_pair(&small, on, gn, &theta0, &theta1)?;
        let ok = dev <= SPECTRAL_TOL;
        report_line(
            ok,
            &format!("spectral {on}<->{gn}"),
            &format!("max deviation {dev:.3e} (tol {SPECTRAL_TOL:.0e})"),
        );
        if !ok {
            failed.push("spectral");
        }
    }

    let tiny = g.truncated(8, 4);
    if tiny
        .labeled_types()
        .iter()
        .all(|&t| tiny.labeled_indices(t).is_empty())
    {
        println!("SKIP gradcheck: no labeled objects among the first 8 of each type");
    } else {
        let params = init_params(&tiny, &small_config(a.seed, false)).map_err(usage)?;
        let report = gradcheck_model(&tiny, &params, 1e-5, GRADCHECK_TOL)?;
        report_line(
            report.passed,
            "gradcheck",
            &format!(
                "max relative error {:.3e} (tol {GRADCHECK_TOL:.0e})",
                report.max_rel_err
            ),
        );
        if !report.passed {
            failed.push("gradcheck");
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            Code::Check,
            anyhow!("failed checks: {}", failed.join(", ")),
        ))
    }
}
