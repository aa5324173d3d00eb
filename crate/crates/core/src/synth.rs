//! Synthetic logs and random formulas for tests, examples and benchmarks.
//!
//! Everything here is deterministic given the seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{AggCond, AggOp, CmpOp, EventExpr, FoeFormula, IndexExpr, NonNumExpr, NumExpr, Range};
use crate::event_log::{AttributeValue, EventLog, Trace};

const HOUR: i64 = 3_600_000;
const MINUTE: i64 = 60_000;

fn text(s: &str) -> AttributeValue {
    AttributeValue::Text(s.to_string())
}

fn event(pairs: &[(&str, AttributeValue)]) -> BTreeMap<String, AttributeValue> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// A 10-event trace carrying every attribute the bundled rules mention.
pub fn showcase_trace() -> Trace {
    let acts = [
        "OrderCreated",
        "Waiting",
        "validation",
        "Validation",
        "assembling",
        "checking",
        "W_Completeren aanvraag",
        "OrderDelivered",
        "A_DECLINED",
        "Queued",
    ];
    let resources = ["r1", "r2", "r1", "r3", "r3", "r4", "r2", "r2", "r5", "r1"];
    let groups = ["g1", "g1", "g1", "g2", "g2", "g1", "g3", "g3", "g2", "g1"];
    let lifecycle = [
        "start",
        "Wait",
        "complete",
        "Awaiting Assignment",
        "Wait - User",
        "complete",
        "start",
        "complete",
        "Wait",
        "complete",
    ];
    let mut t = 1_600_000_000_000i64;
    let events = (0..10)
        .map(|i| {
            let ev = event(&[
                ("concept:name", text(acts[i])),
                ("org:resource", text(resources[i])),
                ("org:group", text(groups[i])),
                ("lifecycle:transition", text(lifecycle[i])),
                ("time:timestamp", AttributeValue::Timestamp(t)),
                ("cost", AttributeValue::Number(10.0 * (i as f64 + 1.0))),
                ("humanCost", AttributeValue::Number(3.0 + i as f64)),
                ("materialCost", AttributeValue::Number(2.0 * i as f64)),
                ("orderID", AttributeValue::Number(7.0)),
                ("expectedDuration", AttributeValue::Number((8 * HOUR) as f64)),
                ("activityNameEN", text(&format!("step {}", i % 4))),
            ]);
            t += (i as i64 + 1) * 25 * MINUTE;
            ev
        })
        .collect();
    Trace::new("showcase", events)
}

/// Attribute names used by [`random_log`]: `a` and `c` numeric, `b` text. Any of them
/// may be missing on an event.
pub const RANDOM_ATTRS: [&str; 3] = ["a", "b", "c"];

pub fn random_trace(rng: &mut impl Rng, id: &str, len: usize) -> Trace {
    let events = (0..len)
        .map(|_| {
            let mut m = BTreeMap::new();
            if rng.gen_bool(0.85) {
                m.insert("a".into(), AttributeValue::Number(rng.gen_range(0..4) as f64));
            }
            if rng.gen_bool(0.85) {
                m.insert("b".into(), text(["x", "y", "z"].choose(rng).unwrap()));
            }
            if rng.gen_bool(0.6) {
                m.insert("c".into(), AttributeValue::Number(rng.gen_range(-3.0..3.0f64).round()));
            }
            m
        })
        .collect();
    Trace::new(id, events)
}

/// `n` traces with lengths drawn from `1..=max_len`.
pub fn random_log(rng: &mut impl Rng, n: usize, max_len: usize) -> EventLog {
    EventLog::new(
        (0..n)
            .map(|i| {
                let len = rng.gen_range(1..=max_len);
                random_trace(rng, &format!("t{i}"), len)
            })
            .collect(),
    )
}

/// Shape limits for [`random_formula`].
#[derive(Debug, Clone, Copy)]
pub struct FormulaShape {
    pub max_depth: usize,
    pub max_quantifiers: usize,
}

impl Default for FormulaShape {
    fn default() -> Self {
        FormulaShape {
            max_depth: 3,
            max_quantifiers: 2,
        }
    }
}

/// Index arithmetic over constants alone prints as plain numbers, which the parser
/// reads back as literals.
fn index_as_num(i: IndexExpr) -> NumExpr {
    fn literal(i: &IndexExpr) -> Option<NumExpr> {
        Some(match i {
            IndexExpr::Const(c) => NumExpr::Lit(*c as f64),
            IndexExpr::Add(a, b) => NumExpr::Add(Box::new(literal(a)?), Box::new(literal(b)?)),
            IndexExpr::Sub(a, b) => NumExpr::Sub(Box::new(literal(a)?), Box::new(literal(b)?)),
            _ => return None,
        })
    }
    literal(&i).unwrap_or(NumExpr::Index(i))
}

const QUANTIFIED: [&str; 2] = ["i", "j"];

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    scope: Vec<&'static str>,
}

impl<R: Rng> Gen<'_, R> {
    fn index(&mut self) -> IndexExpr {
        let base = match self.rng.gen_range(0..5) {
            0 | 1 if !self.scope.is_empty() => IndexExpr::var(self.scope.choose(self.rng).unwrap()),
            0 => IndexExpr::Curr,
            1 | 2 => IndexExpr::Const(self.rng.gen_range(1..=6)),
            3 => IndexExpr::Curr,
            _ => IndexExpr::Last,
        };
        match self.rng.gen_range(0..6) {
            0 => IndexExpr::add(base, IndexExpr::Const(1)),
            1 => IndexExpr::sub(base, IndexExpr::Const(1)),
            _ => base,
        }
    }

    /// Variable-free bound for aggregation ranges.
    fn bound(&mut self) -> IndexExpr {
        match self.rng.gen_range(0..5) {
            0 => IndexExpr::Const(1),
            1 => IndexExpr::Const(self.rng.gen_range(2..=4)),
            2 => IndexExpr::Curr,
            3 => IndexExpr::add(IndexExpr::Curr, IndexExpr::Const(1)),
            _ => IndexExpr::Last,
        }
    }

    fn agg_index(&mut self) -> IndexExpr {
        if self.rng.gen_bool(0.8) {
            IndexExpr::var("x")
        } else {
            IndexExpr::add(IndexExpr::var("x"), IndexExpr::Const(1))
        }
    }

    fn agg_cond(&mut self) -> AggCond {
        match self.rng.gen_range(0..4) {
            0 => AggCond::always(),
            1 => AggCond::Atom(EventExpr::NonNum(
                CmpOp::Eq,
                NonNumExpr::Attr(IndexExpr::var("x"), "b".into()),
                NonNumExpr::Str(["x", "y"].choose(self.rng).unwrap().to_string()),
            )),
            2 => AggCond::Atom(EventExpr::Num(
                *[CmpOp::Gt, CmpOp::Le, CmpOp::Ne].choose(self.rng).unwrap(),
                NumExpr::Attr(IndexExpr::var("x"), "a".into()),
                NumExpr::Lit(self.rng.gen_range(0..4) as f64),
            )),
            _ => AggCond::Not(Box::new(AggCond::Atom(EventExpr::AttrCompare(
                CmpOp::Eq,
                (IndexExpr::var("x"), "a".into()),
                (IndexExpr::add(IndexExpr::var("x"), IndexExpr::Const(1)), "a".into()),
            )))),
        }
    }

    fn aggregate(&mut self) -> NumExpr {
        let range = Range::new(self.bound(), self.bound());
        match self.rng.gen_range(0..6) {
            4 => NumExpr::Count {
                cond: Box::new(self.agg_cond()),
                var: "x".into(),
                range,
            },
            5 => NumExpr::CountVal {
                attr: ["a", "b", "c"].choose(self.rng).unwrap().to_string(),
                range,
            },
            k => {
                let op = [AggOp::Sum, AggOp::Avg, AggOp::Min, AggOp::Max][k];
                let attr = if self.rng.gen_bool(0.7) { "a" } else { "c" };
                let idx = self.agg_index();
                NumExpr::Agg {
                    op,
                    source: Box::new(NumExpr::Attr(idx, attr.into())),
                    var: "x".into(),
                    range,
                    cond: Box::new(self.agg_cond()),
                }
            }
        }
    }

    fn num(&mut self, depth: usize) -> NumExpr {
        match self.rng.gen_range(0..8) {
            0 | 1 => NumExpr::Attr(self.index(), if self.rng.gen_bool(0.7) { "a" } else { "c" }.into()),
            2 => NumExpr::Lit(self.rng.gen_range(0..5) as f64),
            3 => index_as_num(self.index()),
            4 | 5 => self.aggregate(),
            6 if depth > 0 => NumExpr::Add(Box::new(self.num(depth - 1)), Box::new(self.num(depth - 1))),
            6 => NumExpr::Lit(1.0),
            _ if depth > 0 => {
                let (a, b) = (self.num(depth - 1), self.num(depth - 1));
                match self.rng.gen_range(0..3) {
                    0 => NumExpr::Sub(Box::new(a), Box::new(b)),
                    1 => NumExpr::Min2(Box::new(a), Box::new(b)),
                    _ => NumExpr::Max2(Box::new(a), Box::new(b)),
                }
            }
            _ => NumExpr::Attr(IndexExpr::Last, "a".into()),
        }
    }

    fn atom(&mut self) -> EventExpr {
        let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge];
        match self.rng.gen_range(0..10) {
            0 => EventExpr::Bool(self.rng.gen()),
            // Accessor against accessor is written as AttrCompare, which is what the parser produces.
            1 | 2 => EventExpr::NonNum(
                *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).unwrap(),
                NonNumExpr::Attr(self.index(), "b".into()),
                NonNumExpr::Str(["x", "y", "z"].choose(self.rng).unwrap().to_string()),
            ),
            3 => {
                let attr = RANDOM_ATTRS.choose(self.rng).unwrap().to_string();
                EventExpr::AttrCompare(
                    *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).unwrap(),
                    (self.index(), attr.clone()),
                    (self.index(), attr),
                )
            }
            _ => match (*ops.choose(self.rng).unwrap(), self.num(1), self.num(1)) {
                (op @ (CmpOp::Eq | CmpOp::Ne), NumExpr::Attr(i, a), NumExpr::Attr(j, b)) => {
                    EventExpr::AttrCompare(op, (i, a), (j, b))
                }
                (op, l, r) => EventExpr::Num(op, l, r),
            },
        }
    }

    fn formula(&mut self, depth: usize, quantifiers: usize) -> FoeFormula {
        if depth == 0 {
            return FoeFormula::atom(self.atom());
        }
        let free: Vec<&'static str> = QUANTIFIED.iter().copied().filter(|v| !self.scope.contains(v)).collect();
        let choice = self.rng.gen_range(0..7);
        if choice < 2 && quantifiers > 0 && !free.is_empty() {
            let v = free[0];
            self.scope.push(v);
            let body = self.formula(depth - 1, quantifiers - 1);
            self.scope.pop();
            return if choice == 0 {
                FoeFormula::forall(v, body)
            } else {
                FoeFormula::exists(v, body)
            };
        }
        // Split the quantifier budget so the whole formula stays within it.
        let left_q = self.rng.gen_range(0..=quantifiers);
        match choice {
            2 => FoeFormula::not(self.formula(depth - 1, quantifiers)),
            3 => FoeFormula::and(
                self.formula(depth - 1, left_q),
                self.formula(depth - 1, quantifiers - left_q),
            ),
            4 => FoeFormula::or(
                self.formula(depth - 1, left_q),
                self.formula(depth - 1, quantifiers - left_q),
            ),
            5 => FoeFormula::implies(
                self.formula(depth - 1, left_q),
                self.formula(depth - 1, quantifiers - left_q),
            ),
            _ => FoeFormula::atom(self.atom()),
        }
    }
}

/// A random closed formula over the attributes of [`random_log`]. Connective depth is
/// at most `shape.max_depth`; aggregates use the variable `x`, quantifiers `i` and `j`.
pub fn random_formula(rng: &mut impl Rng, shape: FormulaShape) -> FoeFormula {
    let mut g = Gen { rng, scope: Vec::new() };
    let q = shape.max_quantifiers.min(QUANTIFIED.len());
    g.formula(shape.max_depth, q)
}

/// A random aggregate expression (`sum`, `avg`, `min`, `max`, `count` or `countval`).
pub fn random_aggregate(rng: &mut impl Rng) -> NumExpr {
    Gen { rng, scope: Vec::new() }.aggregate()
}

// ---------------------------------------------------------------------------
// Planted patterns

const PHONE: [&str; 3] = ["Phone intake", "Call back", "Phone diagnosis"];
const WEB: [&str; 3] = ["Web form", "Email reply", "Portal update"];

/// Incident-style log for the ping-pong rule (`ar01`).
///
/// A fraction `positive` of the traces ends with a handover between two resources of
/// the same group at positions `|τ|-1, |τ|`. Those traces are served through the phone
/// channel and the rest through the web, except for a fraction `noise` that swaps
/// channels, so the channel-specific activity names reveal the class in every prefix.
pub fn ping_pong_log(n: usize, positive: f64, noise: f64, seed: u64) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = (0..n)
        .map(|t| {
            let pp = rng.gen_bool(positive);
            let phone = pp != rng.gen_bool(noise);
            let pool = if phone { &PHONE } else { &WEB };
            let len = rng.gen_range(4..=10);
            let group = if rng.gen_bool(0.5) { "G1" } else { "G2" };
            let other_group = if group == "G1" { "G2" } else { "G1" };
            let owner = format!("{group}-{}", rng.gen_range(1..=3));
            let mut ts = 1_500_000_000_000i64 + t as i64 * HOUR;
            let events = (1..=len)
                .map(|pos| {
                    let (act, res, grp) = if pos == 1 {
                        ("Open".to_string(), owner.clone(), group)
                    } else if pos == len - 1 {
                        ("Forward".to_string(), owner.clone(), group)
                    } else if pos == len && pp {
                        ("Resolve".to_string(), format!("{group}-9"), group)
                    } else if pos == len {
                        ("Resolve".to_string(), format!("{other_group}-9"), other_group)
                    } else {
                        (pool.choose(&mut rng).unwrap().to_string(), owner.clone(), group)
                    };
                    ts += rng.gen_range(5..120) * MINUTE;
                    event(&[
                        ("concept:name", AttributeValue::Text(act)),
                        ("org:resource", AttributeValue::Text(res)),
                        ("org:group", text(grp)),
                        ("time:timestamp", AttributeValue::Timestamp(ts)),
                    ])
                })
                .collect();
            Trace::new(format!("case-{t}"), events)
        })
        .collect();
    EventLog::new(traces)
}

/// Step names and their fixed offsets (hours) from the case start.
pub const STEPS: [(&str, i64); 8] = [
    ("Register", 0),
    ("Check", 2),
    ("Approve", 5),
    ("Schedule", 9),
    ("Prepare", 14),
    ("Ship", 20),
    ("Invoice", 27),
    ("Close", 35),
];

/// A log where the remaining time depends only on the current activity: every trace
/// walks the [`STEPS`] chain, skipping each inner step with probability 0.3, and each
/// step happens at its fixed offset from the case start.
pub fn remaining_time_log(n: usize, seed: u64) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = (0..n)
        .map(|t| {
            let start = 1_500_000_000_000i64 + rng.gen_range(0..1000) * HOUR;
            let events = STEPS
                .iter()
                .enumerate()
                .filter(|(i, _)| *i == 0 || *i == STEPS.len() - 1 || rng.gen_bool(0.7))
                .map(|(_, (name, off))| {
                    event(&[
                        ("concept:name", text(name)),
                        ("time:timestamp", AttributeValue::Timestamp(start + off * HOUR)),
                    ])
                })
                .collect();
            Trace::new(format!("order-{t}"), events)
        })
        .collect();
    EventLog::new(traces)
}
