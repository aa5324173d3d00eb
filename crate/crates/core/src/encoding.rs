//! Fixed-width encodings of trace prefixes.
//!
//! Every encoder looks at the last `n` events of a prefix, oldest first, so the most
//! recent event always fills the final block. Shorter prefixes are padded with zero
//! blocks on the left.

use serde::{Deserialize, Serialize};

use crate::event_log::{AttributeValue, Event};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodingError {
    #[error("cannot fit an encoder without training prefixes")]
    EmptyTrainingSet,
    #[error("encoder width must be positive (n = 0)")]
    ZeroWidth,
    #[error("encoder expects {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
}

/// Encoder configuration. `n = None` means the longest trace seen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EncoderConfig {
    LastNOneHot {
        #[serde(default)]
        n: Option<usize>,
        attributes: Vec<String>,
    },
    LastNNumeric {
        #[serde(default)]
        n: Option<usize>,
        attributes: Vec<String>,
    },
    TimeDeltas {
        #[serde(default)]
        n: Option<usize>,
    },
    Composite {
        members: Vec<EncoderConfig>,
    },
}

impl EncoderConfig {
    pub fn one_hot(attributes: &[&str]) -> Self {
        EncoderConfig::LastNOneHot {
            n: None,
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::one_hot(&["concept:name"])
    }
}

pub const TIMESTAMP: &str = "time:timestamp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedEncoder {
    LastNOneHot {
        n: usize,
        attributes: Vec<String>,
        /// Sorted distinct rendered values per attribute.
        vocabulary: Vec<Vec<String>>,
    },
    LastNNumeric {
        n: usize,
        attributes: Vec<String>,
    },
    TimeDeltas {
        n: usize,
    },
    Composite {
        members: Vec<FittedEncoder>,
    },
}

fn one_hot_key(v: &AttributeValue) -> Option<String> {
    if v.is_undefined() {
        None
    } else {
        Some(v.render())
    }
}

/// Learns vocabularies from training prefixes. `max_len` supplies the default `n`.
pub fn fit(config: &EncoderConfig, prefixes: &[&[Event]], max_len: usize) -> Result<FittedEncoder, EncodingError> {
    if prefixes.is_empty() {
        return Err(EncodingError::EmptyTrainingSet);
    }
    let width = |n: &Option<usize>| {
        let n = n.unwrap_or(max_len);
        if n == 0 {
            Err(EncodingError::ZeroWidth)
        } else {
            Ok(n)
        }
    };
    Ok(match config {
        EncoderConfig::LastNOneHot { n, attributes } => {
            let n = width(n)?;
            let vocabulary = attributes
                .iter()
                .map(|a| {
                    let mut vals: Vec<String> = prefixes
                        .iter()
                        .flat_map(|p| p.iter().filter_map(|e| one_hot_key(e.get(a))))
                        .collect();
                    vals.sort();
                    vals.dedup();
                    vals
                })
                .collect();
            FittedEncoder::LastNOneHot {
                n,
                attributes: attributes.clone(),
                vocabulary,
            }
        }
        EncoderConfig::LastNNumeric { n, attributes } => FittedEncoder::LastNNumeric {
            n: width(n)?,
            attributes: attributes.clone(),
        },
        EncoderConfig::TimeDeltas { n } => FittedEncoder::TimeDeltas { n: width(n)? },
        EncoderConfig::Composite { members } => FittedEncoder::Composite {
            members: members
                .iter()
                .map(|m| fit(m, prefixes, max_len))
                .collect::<Result<_, _>>()?,
        },
    })
}

fn timestamp(e: &Event) -> Option<f64> {
    e.get(TIMESTAMP).as_number()
}

impl FittedEncoder {
    pub fn width(&self) -> usize {
        match self {
            FittedEncoder::LastNOneHot { n, vocabulary, .. } => n * vocabulary.iter().map(Vec::len).sum::<usize>(),
            FittedEncoder::LastNNumeric { n, attributes } => n * attributes.len(),
            FittedEncoder::TimeDeltas { n } => *n,
            FittedEncoder::Composite { members } => members.iter().map(FittedEncoder::width).sum(),
        }
    }

    /// Column names: `<attr>@-<offset>=<value>`, `<attr>@-<offset>`, `dt@-<offset>`,
    /// where offset 0 is the most recent event.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        self.names_into(&mut out);
        out
    }

    fn names_into(&self, out: &mut Vec<String>) {
        match self {
            FittedEncoder::LastNOneHot {
                n,
                attributes,
                vocabulary,
            } => {
                for off in (0..*n).rev() {
                    for (a, vocab) in attributes.iter().zip(vocabulary) {
                        out.extend(vocab.iter().map(|v| format!("{a}@-{off}={v}")));
                    }
                }
            }
            FittedEncoder::LastNNumeric { n, attributes } => {
                for off in (0..*n).rev() {
                    out.extend(attributes.iter().map(|a| format!("{a}@-{off}")));
                }
            }
            FittedEncoder::TimeDeltas { n } => out.extend((0..*n).rev().map(|off| format!("dt@-{off}"))),
            FittedEncoder::Composite { members } => members.iter().for_each(|m| m.names_into(out)),
        }
    }

    pub fn encode(&self, prefix: &[Event]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_into(prefix, &mut out);
        out
    }

    /// Appends this encoder's features for `prefix` to `out`.
    pub fn encode_into(&self, prefix: &[Event], out: &mut Vec<f64>) {
        match self {
            FittedEncoder::LastNOneHot {
                n,
                attributes,
                vocabulary,
            } => {
                let block: usize = vocabulary.iter().map(Vec::len).sum();
                let shown = prefix.len().min(*n);
                out.resize(out.len() + block * (n - shown), 0.0);
                for e in &prefix[prefix.len() - shown..] {
                    for (a, vocab) in attributes.iter().zip(vocabulary) {
                        let base = out.len();
                        out.resize(base + vocab.len(), 0.0);
                        if let Some(key) = one_hot_key(e.get(a)) {
                            if let Ok(pos) = vocab.binary_search(&key) {
                                out[base + pos] = 1.0;
                            }
                        }
                    }
                }
            }
            FittedEncoder::LastNNumeric { n, attributes } => {
                let shown = prefix.len().min(*n);
                out.resize(out.len() + attributes.len() * (n - shown), 0.0);
                for e in &prefix[prefix.len() - shown..] {
                    out.extend(attributes.iter().map(|a| e.get(a).as_number().unwrap_or(0.0)));
                }
            }
            FittedEncoder::TimeDeltas { n } => {
                let shown = prefix.len().min(*n);
                out.resize(out.len() + (n - shown), 0.0);
                for j in prefix.len() - shown..prefix.len() {
                    let d = if j == 0 {
                        0.0
                    } else {
                        match (timestamp(&prefix[j]), timestamp(&prefix[j - 1])) {
                            (Some(b), Some(a)) => b - a,
                            _ => 0.0,
                        }
                    };
                    out.push(d);
                }
            }
            FittedEncoder::Composite { members } => members.iter().for_each(|m| m.encode_into(prefix, out)),
        }
    }
}
