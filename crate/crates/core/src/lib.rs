//! Prediction tasks over event logs, specified as analytic rules over first-order
//! event expressions.
//!
//! A rule maps every trace prefix to a label or a number. [`labeling::build_dataset`]
//! turns a log into a training set from such a rule, and [`ml`] trains and scores
//! models on it.
//!
//! ```
//! use foe_predict::parser::parse_rule;
//! use foe_predict::ast::validate;
//!
//! let rule = parse_rule(r#"rule {
//!     exists i . (i > curr and i + 1 <= last
//!         and e[i].org:resource != e[i+1].org:resource
//!         and e[i].org:group == e[i+1].org:group) => "Ping-Pong";
//!     default "Not Ping-Pong"
//! }"#).unwrap();
//! assert!(validate(&rule).is_valid());
//! ```

pub mod ast;
pub mod cli;
pub mod corpus;
pub mod encoding;
pub mod eval;
pub mod event_log;
pub mod labeling;
pub mod ml;
pub mod parser;
pub mod synth;
