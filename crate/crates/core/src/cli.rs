//! The `foe-predict` command line: `validate`, `label`, `train`, `evaluate`, `predict`.
//!
//! Settings come from an optional TOML run config (`--config`) and flags; flags win.
//! Relative paths in the config file are resolved against the file's directory.
//!
//! `validate` exits with 0 when clean, 1 on a parse error, 2 on validation findings
//! and 3 on well-definedness violations. Other commands exit with 1 on any error.
//! Usage errors exit with 64.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ast::{validate, AnalyticRule};
use crate::encoding::{EncoderConfig, FittedEncoder};
use crate::eval::check_well_defined;
use crate::event_log::{load_csv, load_xes, CsvMapping, EventLog};
use crate::labeling::{export_csv, label_log, LabelOptions, Task};
use crate::ml::{load_model, save_model, train, HoldoutData, Metrics, ModelSpec, Prediction, TrainedModel};
use crate::parser::parse_rule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ILL_DEFINED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

const DAY_MS: f64 = 86_400_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Xes,
    Csv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Ms,
    Days,
}

impl Unit {
    fn convert(self, ms: f64) -> f64 {
        match self {
            Unit::Ms => ms,
            Unit::Days => ms / DAY_MS,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Unit::Ms => "ms",
            Unit::Days => "days",
        }
    }
}

fn default_split() -> f64 {
    2.0 / 3.0
}

/// Contents of a run-config file. Every field is optional; see the README for an example.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rule: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub format: Option<LogFormat>,
    #[serde(default)]
    pub encoder: Option<EncoderConfig>,
    pub model: Option<ModelSpec>,
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub unit: Option<Unit>,
    pub out: Option<PathBuf>,
    pub csv: Option<CsvMapping>,
    #[serde(default)]
    pub labeling: LabelOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.rule, &mut cfg.log, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "foe-predict",
    version,
    about = "Prediction tasks over event logs from analytic rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and statically check a rule; with --log, also check well-definedness.
    Validate(Common),
    /// Build the labeled dataset and write it as CSV.
    Label(Common),
    /// Train a model on the whole log and save it with its encoder.
    Train(Common),
    /// Holdout evaluation of the configured model next to the ZeroR baseline.
    Evaluate(Common),
    /// Predict for one running prefix with a saved model.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rule: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<LogFormat>,
    /// zeror, tree, linear or logistic.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    unit: Option<Unit>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct PredictArgs {
    /// Model file written by `train`; the encoder is read from `<file>.encoder.json`.
    #[arg(long = "model-file")]
    model_file: PathBuf,
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum)]
    format: Option<LogFormat>,
    #[arg(long)]
    trace: String,
    /// Prefix length, 1 to |τ|.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum)]
    unit: Option<Unit>,
    /// TOML run config; only its `csv` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Settings after merging the config file with flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub rule: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub format: Option<LogFormat>,
    pub encoder: EncoderConfig,
    pub model: ModelSpec,
    pub split: f64,
    pub seed: u64,
    pub unit: Unit,
    pub out: Option<PathBuf>,
    pub csv: CsvMapping,
    pub labeling: LabelOptions,
}

fn merge(c: &Common) -> Result<Settings, String> {
    let cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = c.seed.or(cfg.seed).unwrap_or(0);
    let mut model = match &c.model {
        Some(name) => ModelSpec::from_name(name, seed)
            .ok_or_else(|| format!("unknown model {name:?} (expected zeror, tree, linear or logistic)"))?,
        None => cfg.model.unwrap_or_else(|| ModelSpec::tree(10)),
    };
    if let Some(s) = c.seed {
        match &mut model {
            ModelSpec::DecisionTree { seed, .. } | ModelSpec::LogisticRegression { seed, .. } => *seed = s,
            _ => {}
        }
    }
    let split = c.split.or(cfg.split).unwrap_or_else(default_split);
    if !(split > 0.0 && split < 1.0) {
        return Err(format!("--split must lie in (0, 1), got {split}"));
    }
    Ok(Settings {
        rule: c.rule.clone().or(cfg.rule),
        log: c.log.clone().or(cfg.log),
        format: c.format.or(cfg.format),
        encoder: cfg.encoder.unwrap_or_default(),
        model,
        split,
        seed,
        unit: c.unit.or(cfg.unit).unwrap_or_default(),
        out: c.out.clone().or(cfg.out),
        csv: cfg.csv.unwrap_or_default(),
        labeling: cfg.labeling,
    })
}

fn guess_format(path: &Path) -> LogFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => LogFormat::Csv,
        _ => LogFormat::Xes,
    }
}

pub fn load_log(path: &Path, format: Option<LogFormat>, csv: &CsvMapping) -> Result<EventLog, String> {
    let log = match format.unwrap_or_else(|| guess_format(path)) {
        LogFormat::Xes => load_xes(path),
        LogFormat::Csv => load_csv(path, csv),
    };
    log.map_err(|e| e.to_string())
}

fn read_rule(path: &Path) -> Result<AnalyticRule, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_rule(&text).map_err(|e| format!("{}:{e}", path.display()))
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, String> {
    v.as_deref()
        .ok_or_else(|| format!("missing --{flag} (or `{flag}` in the config file)"))
}

/// Rule + log, with static validation; invalid rules are refused.
fn rule_and_log(s: &Settings) -> Result<(AnalyticRule, EventLog), String> {
    let rule = read_rule(required(&s.rule, "rule")?)?;
    let report = validate(&rule);
    if !report.is_valid() {
        return Err(format!("rule is not valid:\n{report}"));
    }
    let log = load_log(required(&s.log, "log")?, s.format, &s.csv)?;
    Ok((rule, log))
}

fn set_threads() {
    if let Some(n) = std::env::var("FOE_PREDICT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Fails only if the pool already exists, in which case the first setting stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Runs one command with the given arguments (including the program name).
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    set_threads();
    let result = match &cli.command {
        Command::Validate(c) => return cmd_validate(c, out, err),
        Command::Label(c) => merge(c).and_then(|s| cmd_label(&s, out)),
        Command::Train(c) => merge(c).and_then(|s| cmd_train(&s, out)),
        Command::Evaluate(c) => merge(c).and_then(|s| cmd_evaluate(&s, out)),
        Command::Predict(p) => cmd_predict(p, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn cmd_validate(c: &Common, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let s = match merge(c) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let path = match required(&s.rule, "rule") {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let rule = match read_rule(path) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_PARSE;
        }
    };
    let report = validate(&rule);
    if !report.is_valid() {
        let _ = writeln!(out, "{report}");
        return EXIT_INVALID;
    }
    if let Some(log_path) = &s.log {
        let log = match load_log(log_path, s.format, &s.csv) {
            Ok(l) => l,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
        };
        match check_well_defined(&rule, &log) {
            Ok(wd) if !wd.is_well_defined() => {
                let _ = writeln!(out, "rule is not well-defined for {}:", log_path.display());
                for v in &wd.violations {
                    let _ = writeln!(out, "  {v}");
                }
                return EXIT_ILL_DEFINED;
            }
            Ok(_) => {}
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
        }
        let _ = writeln!(
            out,
            "ok: {} rule, well-defined for {} traces",
            rule.kind,
            log.traces.len()
        );
    } else {
        let _ = writeln!(out, "ok: {} rule with {} case(s)", rule.kind, rule.cases.len());
    }
    EXIT_OK
}

fn cmd_label(s: &Settings, out: &mut dyn Write) -> Result<(), String> {
    let (rule, log) = rule_and_log(s)?;
    let (ds, skips, _) = label_log(&rule, &log, &s.encoder, s.labeling).map_err(|e| e.to_string())?;
    writeln!(out, "{} rows, {} feature columns", ds.len(), ds.width()).map_err(|e| e.to_string())?;
    writeln!(out, "{skips}").map_err(|e| e.to_string())?;
    if let Some(path) = &s.out {
        export_csv(&ds, path).map_err(|e| e.to_string())?;
        writeln!(out, "wrote {}", path.display()).map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Path of the encoder stored next to a model file.
pub fn encoder_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".encoder.json");
    PathBuf::from(s)
}

fn cmd_train(s: &Settings, out: &mut dyn Write) -> Result<(), String> {
    let path = required(&s.out, "out")?;
    let (rule, log) = rule_and_log(s)?;
    let (ds, skips, encoder) = label_log(&rule, &log, &s.encoder, s.labeling).map_err(|e| e.to_string())?;
    let model = train(&ds, &s.model).map_err(|e| e.to_string())?;
    save_model(&model, path).map_err(|e| e.to_string())?;
    let enc_json = serde_json::to_string_pretty(&encoder).map_err(|e| e.to_string())?;
    fs::write(encoder_path(path), enc_json).map_err(|e| e.to_string())?;
    let w = |r: std::io::Result<()>| r.map_err(|e| e.to_string());
    w(writeln!(out, "trained {} on {} rows ({skips})", model.kind(), ds.len()))?;
    for n in &model.notes {
        w(writeln!(out, "note: {n}"))?;
    }
    w(writeln!(
        out,
        "wrote {} and {}",
        path.display(),
        encoder_path(path).display()
    ))
}

fn display_name(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::ZeroR => "ZeroR",
        ModelSpec::DecisionTree { .. } => "Decision Tree",
        ModelSpec::LinearRegression { .. } => "Linear Reg.",
        ModelSpec::LogisticRegression { .. } => "Logistic Reg.",
    }
}

/// Renders the metrics table and its JSON counterpart.
pub fn metrics_report(rows: &[(&str, Metrics)], unit: Unit) -> (String, serde_json::Value) {
    let mut table = String::new();
    let mut json_rows = Vec::new();
    let regression = matches!(rows.first(), Some((_, Metrics::Regression { .. })));
    if regression {
        let u = unit.suffix();
        let _ = writeln!(
            table,
            "{:<16}{:>16}{:>16}",
            "Model",
            format!("MAE ({u})"),
            format!("RMSE ({u})")
        );
    } else {
        let _ = writeln!(
            table,
            "{:<16}{:>8}{:>10}{:>8}{:>8}{:>11}",
            "Model", "AUC", "Accuracy", "W.Prec", "W.Rec", "F-Measure"
        );
    }
    for (name, m) in rows {
        match m {
            Metrics::Regression { mae, rmse, n_test } => {
                let (mae, rmse) = (unit.convert(*mae), unit.convert(*rmse));
                let _ = writeln!(table, "{name:<16}{mae:>16.3}{rmse:>16.3}");
                json_rows
                    .push(json!({"model": name, "mae": mae, "rmse": rmse, "unit": unit.suffix(), "n_test": n_test}));
            }
            Metrics::Classification {
                auc,
                accuracy,
                weighted_precision,
                weighted_recall,
                f_measure,
                n_test,
                flags,
            } => {
                let _ = writeln!(
                    table,
                    "{name:<16}{auc:>8.2}{accuracy:>10.2}{weighted_precision:>8.2}{weighted_recall:>8.2}{f_measure:>11.2}"
                );
                json_rows.push(json!({
                    "model": name, "auc": auc, "accuracy": accuracy,
                    "weighted_precision": weighted_precision, "weighted_recall": weighted_recall,
                    "f_measure": f_measure, "n_test": n_test, "flags": flags,
                }));
            }
        }
    }
    (table, json!({ "rows": json_rows }))
}

fn cmd_evaluate(s: &Settings, out: &mut dyn Write) -> Result<(), String> {
    let (rule, log) = rule_and_log(s)?;
    let data = HoldoutData::prepare(&rule, &log, &s.encoder, s.split, s.labeling).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let mut specs = vec![ModelSpec::ZeroR];
    if s.model != ModelSpec::ZeroR {
        specs.push(s.model.clone());
    }
    for spec in &specs {
        let (m, _) = data.evaluate(spec).map_err(|e| e.to_string())?;
        rows.push((display_name(spec), m));
    }
    let (table, mut doc) = metrics_report(&rows, s.unit);
    doc["split"] = json!(s.split);
    doc["train"] = json!({"traces": data.train_traces, "rows": data.train.len(), "skips": data.train_skips});
    doc["test"] = json!({"traces": data.test_traces, "rows": data.test.len(), "skips": data.test_skips});
    let w = |r: std::io::Result<()>| r.map_err(|e| e.to_string());
    w(writeln!(
        out,
        "train: {} traces, {} rows; test: {} traces, {} rows",
        data.train_traces,
        data.train.len(),
        data.test_traces,
        data.test.len()
    ))?;
    w(write!(out, "{table}"))?;
    let text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    match &s.out {
        Some(p) => {
            fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?;
            w(writeln!(out, "wrote {}", p.display()))
        }
        None => w(writeln!(out, "{text}")),
    }
}

fn load_encoder(model_path: &Path) -> Result<FittedEncoder, String> {
    let p = encoder_path(model_path);
    let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
}

/// Prediction for prefix `k` of the named trace.
pub fn predict_prefix(
    model: &TrainedModel,
    encoder: &FittedEncoder,
    log: &EventLog,
    trace: &str,
    k: usize,
) -> Result<Prediction, String> {
    let t = log.trace(trace).ok_or_else(|| format!("unknown trace {trace:?}"))?;
    if k == 0 || k > t.len() {
        return Err(format!("k={k} outside 1..={} for trace {trace:?}", t.len()));
    }
    if encoder.width() != model.width {
        return Err(format!(
            "schema mismatch: encoder yields {} features, model expects {}",
            encoder.width(),
            model.width
        ));
    }
    model.predict(&encoder.encode(t.prefix(k))).map_err(|e| e.to_string())
}

fn cmd_predict(p: &PredictArgs, out: &mut dyn Write) -> Result<(), String> {
    let csv = match &p.config {
        Some(c) => RunConfig::load(c)?.csv.unwrap_or_default(),
        None => CsvMapping::default(),
    };
    let model = load_model(&p.model_file).map_err(|e| format!("{}: {e}", p.model_file.display()))?;
    let encoder = load_encoder(&p.model_file)?;
    let log = load_log(&p.log, p.format, &csv)?;
    let pred = predict_prefix(&model, &encoder, &log, &p.trace, p.k)?;
    let line = match (&pred, model.task) {
        (Prediction::Class { label, .. }, _) => format!("{label}\tscore={:.4}", pred.score()),
        (Prediction::Value(v), Task::Regression) => {
            let unit = p.unit.unwrap_or_default();
            format!("{}\t{}", unit.convert(*v), unit.suffix())
        }
        (Prediction::Value(v), Task::Classification) => v.to_string(),
    };
    writeln!(out, "{line}").map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(
            &cfg,
            "rule = \"r.foe\"\nsplit = 0.5\nseed = 3\nunit = \"days\"\n[model]\ntype = \"logistic_regression\"\n",
        )
        .unwrap();
        let c = Common {
            config: Some(cfg),
            rule: None,
            log: None,
            format: None,
            model: None,
            split: Some(0.8),
            seed: Some(9),
            unit: None,
            out: None,
        };
        let s = merge(&c).unwrap();
        assert_eq!(s.rule.unwrap(), dir.path().join("r.foe"));
        assert_eq!(s.split, 0.8);
        assert_eq!(s.unit, Unit::Days);
        assert!(matches!(s.model, ModelSpec::LogisticRegression { seed: 9, .. }));
    }

    #[test]
    fn bad_split_is_rejected() {
        let c = Common {
            config: None,
            rule: None,
            log: None,
            format: None,
            model: None,
            split: Some(1.0),
            seed: None,
            unit: None,
            out: None,
        };
        assert!(merge(&c).is_err());
    }
}
