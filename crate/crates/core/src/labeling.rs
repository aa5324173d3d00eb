//! Turning a log into a labeled dataset: one row per prefix `k` with `1 < k < |τ|`,
//! features from the encoder, target from the rule.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ast::{AnalyticRule, RuleKind};
use crate::encoding::{fit, EncoderConfig, EncodingError, FittedEncoder};
use crate::eval::{EvalError, PreparedRule};
use crate::event_log::{AttributeValue, Event, EventLog};

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("encoder produced {found} features for trace {trace} k={k}, expected {expected}")]
    EncoderSchemaMismatch {
        trace: String,
        k: usize,
        expected: usize,
        found: usize,
    },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl From<RuleKind> for Task {
    fn from(k: RuleKind) -> Self {
        match k {
            RuleKind::Numeric => Task::Regression,
            RuleKind::NonNumeric => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<AttributeValue>,
    pub task: Task,
    /// `(trace id, k)` for every row.
    pub provenance: Vec<(String, usize)>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Class labels as strings (the rendered target values).
    pub fn labels(&self) -> Vec<String> {
        self.targets.iter().map(AttributeValue::render).collect()
    }

    /// Numeric targets; non-numeric values map to NaN.
    pub fn numeric_targets(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.as_number().unwrap_or(f64::NAN)).collect()
    }
}

/// Counts of prefixes that did not become rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    pub prefixes: usize,
    pub undefined_target: usize,
}

impl std::fmt::Display for SkipReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} prefixes considered, {} dropped (undefined target)",
            self.prefixes, self.undefined_target
        )
    }
}

/// Widens the prefix range beyond `1 < k < |τ|`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOptions {
    #[serde(default)]
    pub include_k1: bool,
    #[serde(default)]
    pub include_klast: bool,
}

pub fn prefix_lengths(len: usize, opts: LabelOptions) -> Vec<usize> {
    (1..=len)
        .filter(|&k| (k > 1 || opts.include_k1) && (k < len || opts.include_klast))
        .collect()
}

/// All prefixes that [`build_dataset`] would use, in row order.
pub fn training_prefixes(log: &EventLog, opts: LabelOptions) -> Vec<&[Event]> {
    log.traces
        .iter()
        .flat_map(|t| prefix_lengths(t.len(), opts).into_iter().map(move |k| t.prefix(k)))
        .collect()
}

/// Labels every prefix in range and encodes it. Rows follow log order, then `k`; prefixes whose target is ⊥ are dropped.
pub fn build_dataset(
    rule: &AnalyticRule,
    log: &EventLog,
    encoder: &FittedEncoder,
    opts: LabelOptions,
) -> Result<(LabeledDataset, SkipReport), LabelError> {
    let prepared = PreparedRule::new(rule);
    let width = encoder.width();
    type Row = (Vec<f64>, AttributeValue, usize);
    let per_trace: Vec<Result<Vec<Row>, LabelError>> = log
        .traces
        .par_iter()
        .map(|t| {
            let ks = prefix_lengths(t.len(), opts);
            let targets = prepared.apply_all(t, &ks)?;
            ks.into_iter()
                .zip(targets)
                .map(|(k, target)| {
                    let x = encoder.encode(t.prefix(k));
                    if x.len() != width {
                        return Err(LabelError::EncoderSchemaMismatch {
                            trace: t.id.clone(),
                            k,
                            expected: width,
                            found: x.len(),
                        });
                    }
                    Ok((x, target, k))
                })
                .collect()
        })
        .collect();

    let mut ds = LabeledDataset {
        feature_names: encoder.feature_names(),
        rows: Vec::new(),
        targets: Vec::new(),
        task: rule.kind.into(),
        provenance: Vec::new(),
    };
    let mut skips = SkipReport::default();
    for (t, rows) in log.traces.iter().zip(per_trace) {
        for (x, target, k) in rows? {
            skips.prefixes += 1;
            if target.is_undefined() {
                skips.undefined_target += 1;
                continue;
            }
            ds.rows.push(x);
            ds.targets.push(target);
            ds.provenance.push((t.id.clone(), k));
        }
    }
    Ok((ds, skips))
}

/// Fits `config` on the log's own prefixes and builds the dataset.
pub fn label_log(
    rule: &AnalyticRule,
    log: &EventLog,
    config: &EncoderConfig,
    opts: LabelOptions,
) -> Result<(LabeledDataset, SkipReport, FittedEncoder), LabelError> {
    let encoder = fit_on_log(config, log, opts)?;
    let (ds, skips) = build_dataset(rule, log, &encoder, opts)?;
    Ok((ds, skips, encoder))
}

/// Fits an encoder on the prefixes of `log`; falls back to whole traces when no
/// prefix is in range, so that very short logs still get a vocabulary.
pub fn fit_on_log(config: &EncoderConfig, log: &EventLog, opts: LabelOptions) -> Result<FittedEncoder, LabelError> {
    let mut prefixes = training_prefixes(log, opts);
    if prefixes.is_empty() {
        prefixes = log.traces.iter().map(|t| &t.events[..]).collect();
    }
    Ok(fit(config, &prefixes, log.max_trace_len())?)
}

/// Writes features plus a `target` column. Floats use shortest round-trip formatting.
pub fn export_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<(), LabelError> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_path(path)?;
    let mut header = ds.feature_names.clone();
    header.push("target".into());
    w.write_record(&header)?;
    for (row, t) in ds.rows.iter().zip(&ds.targets) {
        let mut rec: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        rec.push(match (ds.task, t) {
            (Task::Regression, v) => v.as_number().map(|x| x.to_string()).unwrap_or_default(),
            (Task::Classification, v) => v.render(),
        });
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a file written by [`export_csv`]. Provenance is not stored and comes back empty.
pub fn load_dataset_csv(path: impl AsRef<Path>, task: Task) -> Result<LabeledDataset, LabelError> {
    let path = path.as_ref();
    let bad = |message: String| LabelError::Format {
        path: path.display().to_string(),
        message,
    };
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.last().map(String::as_str) != Some("target") {
        return Err(bad("last column must be `target`".into()));
    }
    let width = header.len() - 1;
    let mut ds = LabeledDataset {
        feature_names: header[..width].to_vec(),
        rows: Vec::new(),
        targets: Vec::new(),
        task,
        provenance: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = (0..width)
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("row {}: bad number {:?}", line + 2, &rec[i])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let raw = &rec[width];
        let target = match task {
            Task::Classification => AttributeValue::Text(raw.to_string()),
            Task::Regression => AttributeValue::Number(
                raw.parse()
                    .map_err(|_| bad(format!("row {}: bad target {raw:?}", line + 2)))?,
            ),
        };
        ds.rows.push(row);
        ds.targets.push(target);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::Trace;
    use crate::parser::parse_rule;
    use std::collections::BTreeMap;

    fn log_with(ts: &[&[i64]]) -> EventLog {
        EventLog::new(
            ts.iter()
                .enumerate()
                .map(|(i, times)| {
                    Trace::new(
                        format!("t{i}"),
                        times
                            .iter()
                            .enumerate()
                            .map(|(j, &ms)| {
                                let mut m = BTreeMap::new();
                                m.insert("time:timestamp".to_string(), AttributeValue::Timestamp(ms));
                                m.insert("concept:name".to_string(), AttributeValue::Text(format!("a{j}")));
                                m
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    const AR2: &str = "rule { curr < last => e[last].time:timestamp - e[curr].time:timestamp; default 0 }";

    #[test]
    fn prefix_range() {
        assert_eq!(prefix_lengths(5, LabelOptions::default()), vec![2, 3, 4]);
        assert!(prefix_lengths(2, LabelOptions::default()).is_empty());
        assert_eq!(prefix_lengths(3, LabelOptions::default()), vec![2]);
        let wide = LabelOptions {
            include_k1: true,
            include_klast: true,
        };
        assert_eq!(prefix_lengths(3, wide), vec![1, 2, 3]);
    }

    #[test]
    fn remaining_time_targets() {
        let times: &[i64] = &[0, 1000, 2000, 3000];
        let log = log_with(&[times, &[0, 5]]);
        let rule = parse_rule(AR2).unwrap();
        let (ds, skips, _) = label_log(&rule, &log, &EncoderConfig::default(), LabelOptions::default()).unwrap();
        assert_eq!(ds.task, Task::Regression);
        let want: Vec<f64> = [2, 3].iter().map(|&k| (times[3] - times[k - 1]) as f64).collect();
        assert_eq!(ds.numeric_targets(), want);
        assert_eq!(ds.provenance, vec![("t0".to_string(), 2), ("t0".to_string(), 3)]);
        assert_eq!(skips.undefined_target, 0);
        assert!(ds.rows.iter().all(|r| r.len() == ds.width()));
    }

    #[test]
    fn undefined_targets_are_dropped() {
        let log = log_with(&[&[0, 1, 2, 3, 4]]);
        let rule = parse_rule("rule { default e[curr].missing + 1 }").unwrap();
        let (ds, skips, _) = label_log(&rule, &log, &EncoderConfig::default(), LabelOptions::default()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(
            skips,
            SkipReport {
                prefixes: 3,
                undefined_target: 3
            }
        );
    }

    #[test]
    fn csv_round_trip() {
        let log = log_with(&[&[0, 1, 2, 3, 4], &[0, 10, 20]]);
        let cfg = EncoderConfig::Composite {
            members: vec![EncoderConfig::default(), EncoderConfig::TimeDeltas { n: Some(2) }],
        };
        let rule = parse_rule(AR2).unwrap();
        let (mut ds, _, _) = label_log(&rule, &log, &cfg, LabelOptions::default()).unwrap();
        ds.rows[0][0] = 0.1 + 0.2;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        export_csv(&ds, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), ds.len() + 1);
        let back = load_dataset_csv(&p, Task::Regression).unwrap();
        assert_eq!(back.rows, ds.rows);
        assert_eq!(back.targets, ds.targets);
        assert_eq!(back.feature_names, ds.feature_names);

        let rule = parse_rule(r#"rule { curr > 2 => "late, \"quoted\""; default "early" }"#).unwrap();
        let (ds, _, _) = label_log(&rule, &log, &cfg, LabelOptions::default()).unwrap();
        export_csv(&ds, &p).unwrap();
        assert_eq!(load_dataset_csv(&p, Task::Classification).unwrap().targets, ds.targets);
    }
}
