//! Command-line surface: extract, balance, rank, curve, train, evaluate,
//! bench, report.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Every output file
//! embeds the seed and tool version; reruns are byte-identical except for
//! wall-clock latency fields.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::capture::{
    assemble_flows, label_flows, parse_label_rules, read_capture, AssembleConfig, LabelPolicy,
};
use crate::dataset::Dataset;
use crate::error::Error;
use crate::eval::{
    benchmark_latency, evaluate_subsets, performance_ratio, prf1, subset_features, ConfusionMatrix,
};
use crate::models::{
    load_model, save_model, FeatureSubsample, ForestParams, ModelSpec, TreeParams,
};
use crate::ranking::{feature_curve, rank_features, RankMethod, RankParams};

#[derive(Parser)]
#[command(
    name = "botsift",
    version,
    about = "TCP-flow features, feature ranking, and fast traffic classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a labeled flow-feature dataset from capture files
    Extract(ExtractArgs),
    /// Cap per-class sample counts to quasi-balance a dataset
    Balance(BalanceArgs),
    /// Rank features by Gini Importance or Information Gain
    Rank(RankArgs),
    /// F1 curve over ranked feature prefixes (n = 1..all)
    Curve(CurveArgs),
    /// Train a classifier and save it as JSON
    Train(TrainArgs),
    /// Cross-validate a model on a feature subset, with latency
    Evaluate(EvaluateArgs),
    /// Measure per-sample classification latency of a saved model
    Bench(BenchArgs),
    /// Merge evaluation reports into table and plot data files
    Report(ReportArgs),
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed (falls back to BOTSIFT_SEED)
    #[arg(long, env = "BOTSIFT_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExtractArgs {
    /// Capture file(s) to read
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Label rules file: one `<ip-or-CIDR> <label>` per line
    #[arg(long)]
    labels: PathBuf,
    /// Output dataset CSV
    #[arg(long)]
    output: PathBuf,
    /// Label for flows no rule matches (default: drop them)
    #[arg(long)]
    default_label: Option<String>,
    /// Drop flows with fewer packets than this
    #[arg(long, default_value_t = 2)]
    min_packets: usize,
    /// Idle gap (seconds) that closes a flow
    #[arg(long, default_value_t = 300.0)]
    idle_timeout: f64,
    /// Keep flows open across RST packets
    #[arg(long)]
    no_rst_terminate: bool,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct BalanceArgs {
    /// Input dataset CSV
    #[arg(long)]
    input: PathBuf,
    /// Maximum samples kept per class
    #[arg(long)]
    cap: usize,
    /// Output dataset CSV
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct RankArgs {
    /// Input dataset CSV
    #[arg(long)]
    input: PathBuf,
    /// gi (Gini Importance) or ig (Information Gain)
    #[arg(long, value_parser = ["gi", "ig"])]
    method: String,
    /// Bins for Information Gain discretization
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Trees in the Gini Importance forest
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Output file (stdout if omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct CurveArgs {
    /// Input dataset CSV
    #[arg(long)]
    input: PathBuf,
    /// Ranking method: gi or ig
    #[arg(long, value_parser = ["gi", "ig"])]
    method: String,
    /// Model: dt, rf or knn
    #[arg(long, value_parser = ["dt", "rf", "knn"])]
    model: String,
    #[command(flatten)]
    model_params: ModelParams,
    /// Bins for Information Gain discretization
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Cross-validation folds
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Output file (stdout if omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct ModelParams {
    /// Random-forest tree count
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// k-NN neighbor count
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Tree depth limit (unlimited if omitted)
    #[arg(long)]
    depth: Option<usize>,
    /// Minimum node size eligible for splitting
    #[arg(long, default_value_t = 2)]
    min_split: usize,
    /// Per-split feature pool for rf: sqrt, all, or a count
    #[arg(long, default_value = "sqrt")]
    rf_features: String,
    /// Train each rf tree on the full sample instead of a bootstrap
    #[arg(long)]
    no_bootstrap: bool,
}

#[derive(Args)]
struct SubsetArgs {
    /// Built-in feature subset: five, six, seven or all
    #[arg(long, conflicts_with = "features")]
    subset: Option<String>,
    /// Explicit comma-separated feature list
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset CSV
    #[arg(long)]
    input: PathBuf,
    /// Model: dt, rf or knn
    #[arg(long, value_parser = ["dt", "rf", "knn"])]
    model: String,
    #[command(flatten)]
    model_params: ModelParams,
    #[command(flatten)]
    subset: SubsetArgs,
    /// Output model JSON
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input dataset CSV
    #[arg(long)]
    input: PathBuf,
    /// Model: dt, rf or knn
    #[arg(long, value_parser = ["dt", "rf", "knn"])]
    model: String,
    #[command(flatten)]
    model_params: ModelParams,
    #[command(flatten)]
    subset: SubsetArgs,
    /// Cross-validation folds
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Held-out fraction used for latency timing
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    /// Output file (stdout if omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// json or csv
    #[arg(long, default_value = "json", value_parser = ["csv", "json"])]
    format: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Saved model JSON
    #[arg(long)]
    model: PathBuf,
    /// Test dataset CSV (must contain the model's features)
    #[arg(long)]
    input: PathBuf,
    /// Warm-up passes (discarded)
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Measured passes
    #[arg(long, default_value_t = 10)]
    passes: usize,
    /// Output file (stdout if omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// json or csv
    #[arg(long, default_value = "json", value_parser = ["csv", "json"])]
    format: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct ReportArgs {
    /// Evaluation report JSON files
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

enum RunError {
    Usage(String),
    Data(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Data(e)
    }
}

/// Run the CLI; returns the process exit code.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(RunError::Usage(msg)) => {
            eprintln!("botsift: {msg}");
            1
        }
        Err(RunError::Data(e)) => {
            eprintln!("botsift: {e}");
            2
        }
    }
}

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::Extract(args) => extract(args),
        Command::Balance(args) => balance(args),
        Command::Rank(args) => rank(args),
        Command::Curve(args) => curve(args),
        Command::Train(args) => train(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Bench(args) => bench(args),
        Command::Report(args) => report(args),
    }
}

fn metadata_line(seed: u64) -> String {
    format!("# botsift {} seed={seed}\n", crate::VERSION)
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|e| {
        RunError::Data(Error::FileIo {
            path: path.display().to_string(),
            source: e,
        })
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), RunError> {
    match output {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_format(format: &str) -> Result<bool, RunError> {
    match format {
        "csv" => Ok(false),
        "json" => Ok(true),
        other => Err(RunError::Usage(format!(
            "unknown format '{other}' (expected csv or json)"
        ))),
    }
}

fn model_spec(name: &str, p: &ModelParams) -> Result<ModelSpec, RunError> {
    let tree = TreeParams {
        max_depth: p.depth,
        min_samples_split: p.min_split,
    };
    match name {
        "dt" => Ok(ModelSpec::DecisionTree(tree)),
        "rf" => {
            let feature_subsample = match p.rf_features.as_str() {
                "sqrt" => FeatureSubsample::Sqrt,
                "all" => FeatureSubsample::All,
                count => FeatureSubsample::Count(count.parse().map_err(|_| {
                    RunError::Usage(format!(
                        "--rf-features expects sqrt, all or a count, got '{count}'"
                    ))
                })?),
            };
            Ok(ModelSpec::RandomForest(ForestParams {
                m: p.m,
                bootstrap: !p.no_bootstrap,
                feature_subsample,
                tree,
            }))
        }
        "knn" => Ok(ModelSpec::Knn { k: p.k }),
        other => Err(RunError::Usage(format!(
            "unknown model '{other}' (expected dt, rf or knn)"
        ))),
    }
}

/// Resolve --subset/--features to (name, feature list); None means all
/// columns as-is.
fn resolve_subset(args: &SubsetArgs) -> Result<Option<(String, Vec<String>)>, RunError> {
    if let Some(name) = &args.subset {
        let features = subset_features(name).ok_or_else(|| {
            RunError::Usage(format!(
                "unknown subset '{name}' (expected five, six, seven or all)"
            ))
        })?;
        return Ok(Some((name.clone(), features)));
    }
    if let Some(features) = &args.features {
        return Ok(Some(("custom".to_string(), features.clone())));
    }
    Ok(None)
}

fn extract(args: ExtractArgs) -> Result<(), RunError> {
    let rules_text = fs::read_to_string(&args.labels).map_err(|e| Error::FileIo {
        path: args.labels.display().to_string(),
        source: e,
    })?;
    let rules = parse_label_rules(&rules_text)?;
    let policy = match &args.default_label {
        Some(label) => LabelPolicy::Default(label.clone()),
        None => LabelPolicy::Drop,
    };
    let config = AssembleConfig {
        idle_timeout: args.idle_timeout,
        terminate_on_rst: !args.no_rst_terminate,
    };

    let mut labeled = Vec::new();
    let mut packet_count = 0usize;
    for path in &args.input {
        let packets = read_capture(path)?;
        packet_count += packets.len();
        let flows = assemble_flows(&packets, &config);
        labeled.extend(label_flows(flows, &rules, &policy)?);
    }
    let flow_count = labeled.len();
    let dataset = Dataset::from_labeled_flows(&labeled, args.min_packets)?;

    let mut text = metadata_line(args.seed.seed);
    let mut body = Vec::new();
    dataset.write_csv_to(&mut body).map_err(RunError::Data)?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    write_text(&args.output, &text)?;
    println!(
        "extracted {} samples ({} classes) from {packet_count} TCP packets, {flow_count} labeled flows",
        dataset.len(),
        dataset.classes().len(),
    );
    Ok(())
}

fn balance(args: BalanceArgs) -> Result<(), RunError> {
    let dataset = Dataset::read_csv(&args.input)?;
    let balanced = dataset.quasi_balance(args.cap, args.seed.seed)?;
    let mut text = metadata_line(args.seed.seed);
    let mut body = Vec::new();
    balanced.write_csv_to(&mut body).map_err(RunError::Data)?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    write_text(&args.output, &text)?;
    for (class, count) in balanced.class_counts() {
        println!("{class}: {count}");
    }
    Ok(())
}

fn rank(args: RankArgs) -> Result<(), RunError> {
    let json = parse_format(&args.format)?;
    let method = RankMethod::parse(&args.method)?;
    let dataset = Dataset::read_csv(&args.input)?;
    let params = RankParams {
        bins: args.bins,
        forest: ForestParams {
            m: args.m,
            ..Default::default()
        },
    };
    let scores = match method {
        RankMethod::GiniImportance => {
            crate::ranking::gini_importance(&dataset, &params.forest, args.seed.seed)?
        }
        RankMethod::InformationGain => {
            crate::ranking::information_gain_scores(&dataset, params.bins)?
        }
    };
    let ranking = crate::ranking::ranking_from_scores(&scores);

    let text = if json {
        let value = json!({
            "tool_version": crate::VERSION,
            "seed": args.seed.seed,
            "method": method.id(),
            "scores": scores.scores.iter().map(|(f, s)| json!({"feature": f, "score": s})).collect::<Vec<_>>(),
            "ranking": ranking.features,
        });
        format!(
            "{}\n",
            serde_json::to_string_pretty(&value).map_err(Error::Json)?
        )
    } else {
        let mut text = metadata_line(args.seed.seed);
        text.push_str("feature,score\n");
        for feature in &ranking.features {
            let score = scores
                .scores
                .iter()
                .find(|(f, _)| f == feature)
                .map(|(_, s)| *s)
                .unwrap_or(0.0);
            text.push_str(&format!("{feature},{score}\n"));
        }
        text
    };
    emit(args.output.as_deref(), &text)
}

fn curve(args: CurveArgs) -> Result<(), RunError> {
    let json = parse_format(&args.format)?;
    let method = RankMethod::parse(&args.method)?;
    let spec = model_spec(&args.model, &args.model_params)?;
    let dataset = Dataset::read_csv(&args.input)?;
    let params = RankParams {
        bins: args.bins,
        forest: ForestParams {
            m: args.model_params.m,
            ..Default::default()
        },
    };
    let ranking = rank_features(&dataset, method, &params, args.seed.seed)?;
    let curve = feature_curve(&dataset, &ranking, &spec, args.folds, args.seed.seed)?;

    let text = if json {
        let value = json!({
            "tool_version": crate::VERSION,
            "seed": args.seed.seed,
            "method": method.id(),
            "model": curve.model,
            "points": curve.points.iter().map(|p| json!({
                "n": p.n, "feature_added": p.feature_added, "f1": p.weighted_f1,
            })).collect::<Vec<_>>(),
        });
        format!(
            "{}\n",
            serde_json::to_string_pretty(&value).map_err(Error::Json)?
        )
    } else {
        let mut text = metadata_line(args.seed.seed);
        text.push_str("n,feature_added,f1\n");
        for p in &curve.points {
            text.push_str(&format!("{},{},{}\n", p.n, p.feature_added, p.weighted_f1));
        }
        text
    };
    emit(args.output.as_deref(), &text)
}

fn train(args: TrainArgs) -> Result<(), RunError> {
    let spec = model_spec(&args.model, &args.model_params)?;
    let mut dataset = Dataset::read_csv(&args.input)?;
    if let Some((_, features)) = resolve_subset(&args.subset)? {
        dataset = dataset.project(&features)?;
    }
    let model = spec.train(&dataset, args.seed.seed)?;
    save_model(&model, args.seed.seed, &args.output)?;
    println!(
        "trained {} on {} samples x {} features -> {}",
        spec.describe(),
        dataset.len(),
        dataset.schema().len(),
        args.output.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), RunError> {
    let json = parse_format(&args.format)?;
    let spec = model_spec(&args.model, &args.model_params)?;
    let dataset = Dataset::read_csv(&args.input)?;
    let (name, features) = match resolve_subset(&args.subset)? {
        Some(pair) => pair,
        None => ("all-columns".to_string(), dataset.schema().to_vec()),
    };
    let reports = evaluate_subsets(
        &dataset,
        &[(name, features)],
        std::slice::from_ref(&spec),
        args.folds,
        args.seed.seed,
        args.holdout,
    )?;
    let report = &reports[0];
    let text = if json {
        format!(
            "{}\n",
            serde_json::to_string_pretty(&report.to_json()).map_err(Error::Json)?
        )
    } else {
        let mut text = metadata_line(args.seed.seed);
        text.push_str(&report.to_table_csv());
        text
    };
    emit(args.output.as_deref(), &text)?;
    eprintln!(
        "{} subset={} weighted_f1={:.4} macro_f1={:.4} latency={:.3e}s performance={:.1}/ms",
        report.model,
        report.subset.as_deref().unwrap_or("-"),
        report.weighted_f1,
        report.macro_f1,
        report
            .latency
            .as_ref()
            .map(|l| l.seconds_per_sample)
            .unwrap_or(0.0),
        report.performance_ms().unwrap_or(0.0),
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), RunError> {
    let json = parse_format(&args.format)?;
    let model = load_model(&args.model)?;
    let dataset = Dataset::read_csv(&args.input)?;
    let projected = dataset.project(model.schema())?;

    let truth: Vec<String> = projected
        .samples()
        .iter()
        .map(|s| s.label.clone())
        .collect();
    let mut predicted = Vec::with_capacity(projected.len());
    for s in projected.samples() {
        predicted.push(model.predict(&s.values)?.to_string());
    }
    let confusion = ConfusionMatrix::from_pairs(&truth, &predicted)?;
    let metrics = prf1(&confusion)?;

    let samples: Vec<Vec<f64>> = projected
        .samples()
        .iter()
        .map(|s| s.values.clone())
        .collect();
    let latency = benchmark_latency(&model, &samples, args.warmup, args.passes)?;
    let overall = performance_ratio(
        metrics.weighted_f1.clamp(0.0, 1.0),
        latency.seconds_per_sample,
    )?;

    let text = if json {
        let value = json!({
            "tool_version": crate::VERSION,
            "seed": args.seed.seed,
            "model_kind": model.kind(),
            "features": model.schema(),
            "samples": latency.samples,
            "measured_passes": latency.measured_passes,
            "seconds_per_sample": latency.seconds_per_sample,
            "weighted_f1": metrics.weighted_f1,
            "macro_f1": metrics.macro_f1,
            "performance_per_ms": overall,
            "per_class": metrics.per_class.iter().map(|c| json!({
                "class": c.class,
                "f1": c.f1,
                "performance_per_ms": c.f1 / (latency.seconds_per_sample * 1000.0),
            })).collect::<Vec<_>>(),
        });
        format!(
            "{}\n",
            serde_json::to_string_pretty(&value).map_err(Error::Json)?
        )
    } else {
        let mut text = metadata_line(args.seed.seed);
        text.push_str("class,f1,recall,precision,performance\n");
        for c in &metrics.per_class {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                c.class,
                c.f1,
                c.recall,
                c.precision,
                c.f1 / (latency.seconds_per_sample * 1000.0)
            ));
        }
        text
    };
    emit(args.output.as_deref(), &text)?;
    eprintln!(
        "{} samples x {} passes: {:.3e}s/sample, weighted_f1={:.4}, performance={:.1}/ms",
        latency.samples,
        latency.measured_passes,
        latency.seconds_per_sample,
        metrics.weighted_f1,
        overall,
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), RunError> {
    let mut reports: Vec<(String, Value)> = Vec::new();
    for path in &args.input {
        let text = fs::read_to_string(path).map_err(|e| Error::FileIo {
            path: path.display().to_string(),
            source: e,
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::CsvParse {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        let model = value["model"].as_str().unwrap_or("model").to_string();
        let subset = value["subset"].as_str().unwrap_or("all").to_string();
        let mut id = format!("{model}-{subset}");
        let mut n = 1;
        while reports.iter().any(|(existing, _)| existing == &id) {
            n += 1;
            id = format!("{model}-{subset}-{n}");
        }
        reports.push((id, value));
    }
    if reports.is_empty() {
        return Err(RunError::Usage("no input reports".to_string()));
    }

    fs::create_dir_all(&args.output).map_err(|e| Error::FileIo {
        path: args.output.display().to_string(),
        source: e,
    })?;

    // union of classes across reports, in first-appearance order
    let mut classes: Vec<String> = Vec::new();
    for (_, value) in &reports {
        if let Some(per_class) = value["per_class"].as_array() {
            for entry in per_class {
                if let Some(class) = entry["class"].as_str() {
                    if !classes.iter().any(|c| c == class) {
                        classes.push(class.to_string());
                    }
                }
            }
        }
    }

    let class_cell = |value: &Value, class: &str, field: &str| -> String {
        value["per_class"]
            .as_array()
            .and_then(|rows| {
                rows.iter()
                    .find(|e| e["class"].as_str() == Some(class))
                    .and_then(|e| e[field].as_f64())
            })
            .map(|v| v.to_string())
            .unwrap_or_default()
    };

    let mut table = metadata_line(args.seed.seed);
    table.push_str("class");
    for metric in ["f1", "recall", "precision", "performance_per_ms"] {
        for (id, _) in &reports {
            table.push_str(&format!(",{metric}[{id}]"));
        }
    }
    table.push('\n');
    for class in &classes {
        table.push_str(class);
        for metric in ["f1", "recall", "precision", "performance_per_ms"] {
            for (_, value) in &reports {
                table.push(',');
                table.push_str(&class_cell(value, class, metric));
            }
        }
        table.push('\n');
    }
    let table_path = args.output.join("table.csv");
    write_text(&table_path, &table)?;

    let mut summary = metadata_line(args.seed.seed);
    summary
        .push_str("id,model,subset,weighted_f1,macro_f1,seconds_per_sample,performance_per_ms\n");
    for (id, value) in &reports {
        let field = |name: &str| {
            value[name]
                .as_f64()
                .map(|v| v.to_string())
                .unwrap_or_default()
        };
        summary.push_str(&format!(
            "{id},{},{},{},{},{},{}\n",
            value["model"].as_str().unwrap_or(""),
            value["subset"].as_str().unwrap_or(""),
            field("weighted_f1"),
            field("macro_f1"),
            field("latency_seconds_per_sample"),
            field("performance_per_ms"),
        ));
    }
    let summary_path = args.output.join("summary.csv");
    write_text(&summary_path, &summary)?;
    println!(
        "wrote {} and {} covering {} reports",
        table_path.display(),
        summary_path.display(),
        reports.len()
    );
    Ok(())
}
