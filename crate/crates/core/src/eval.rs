//! The interpretation function over a trace `τ`, prefix length `k` and valuation `ν`.
//!
//! Numeric results are `Option<f64>` with `None` standing for ⊥. Any comparison with a
//! ⊥ side is false, so satisfaction is total on closed formulas.

use std::collections::HashSet;
use std::fmt;

use crate::ast::{
    AggCond, AggOp, AnalyticRule, CmpOp, EventExpr, FoeFormula, IndexExpr, NonNumExpr, NumExpr, Range, TargetExpr,
};
use crate::event_log::{AttributeValue, EventLog, Trace};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound index variable {0}")]
    UnboundVariable(String),
    #[error("formula is not closed: free variable(s) {}", .0.join(", "))]
    NotClosed(Vec<String>),
    #[error("prefix length {k} outside 1..={len}")]
    PrefixOutOfRange { k: usize, len: usize },
    #[error("expression is not an aggregate")]
    NotAnAggregate,
}

/// Variable valuation ν: index variables mapped to positive integers. Later bindings shadow earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Valuation<'v> {
    bindings: Vec<(&'v str, i64)>,
}

impl<'v> Valuation<'v> {
    pub fn new() -> Self {
        Valuation { bindings: Vec::new() }
    }

    pub fn bind(&mut self, var: &'v str, value: i64) {
        self.bindings.push((var, value));
    }

    fn pop(&mut self) {
        self.bindings.pop();
    }

    pub fn get(&self, var: &str) -> Option<i64> {
        self.bindings.iter().rev().find(|(v, _)| *v == var).map(|(_, x)| *x)
    }
}

/// `(τ, k, ν)`.
#[derive(Debug, Clone)]
pub struct EvalContext<'t, 'v> {
    pub trace: &'t Trace,
    pub k: usize,
    pub valuation: Valuation<'v>,
}

impl<'t, 'v> EvalContext<'t, 'v> {
    pub fn new(trace: &'t Trace, k: usize) -> Self {
        EvalContext {
            trace,
            k,
            valuation: Valuation::new(),
        }
    }

    pub fn with(mut self, var: &'v str, value: i64) -> Self {
        self.valuation.bind(var, value);
        self
    }

    fn len(&self) -> i64 {
        self.trace.len() as i64
    }
}

pub fn eval_index(e: &IndexExpr, ctx: &EvalContext<'_, '_>) -> Result<i64, EvalError> {
    Ok(match e {
        IndexExpr::Var(v) => ctx
            .valuation
            .get(v)
            .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?,
        IndexExpr::Const(c) => *c as i64,
        IndexExpr::Curr => ctx.k as i64,
        IndexExpr::Last => ctx.len(),
        IndexExpr::Add(a, b) => eval_index(a, ctx)? + eval_index(b, ctx)?,
        IndexExpr::Sub(a, b) => eval_index(a, ctx)? - eval_index(b, ctx)?,
    })
}

fn both(a: Option<f64>, b: Option<f64>, f: impl Fn(f64, f64) -> f64) -> Option<f64> {
    Some(f(a?, b?))
}

pub fn eval_num<'v>(e: &'v NumExpr, ctx: &mut EvalContext<'_, 'v>) -> Result<Option<f64>, EvalError> {
    Ok(match e {
        NumExpr::Lit(x) => Some(*x),
        NumExpr::Index(i) => Some(eval_index(i, ctx)? as f64),
        NumExpr::Attr(i, name) => {
            let idx = eval_index(i, ctx)?;
            ctx.trace.attribute(idx, name).as_number()
        }
        NumExpr::Add(a, b) => both(eval_num(a, ctx)?, eval_num(b, ctx)?, |x, y| x + y),
        NumExpr::Sub(a, b) => both(eval_num(a, ctx)?, eval_num(b, ctx)?, |x, y| x - y),
        NumExpr::Min2(a, b) => both(eval_num(a, ctx)?, eval_num(b, ctx)?, f64::min),
        NumExpr::Max2(a, b) => both(eval_num(a, ctx)?, eval_num(b, ctx)?, f64::max),
        NumExpr::Agg { .. } | NumExpr::Count { .. } | NumExpr::CountVal { .. } => match eval_aggregate(e, ctx)? {
            AttributeValue::Number(x) => Some(x),
            _ => None,
        },
    })
}

pub fn eval_nonnum<'v>(e: &'v NonNumExpr, ctx: &mut EvalContext<'_, 'v>) -> Result<AttributeValue, EvalError> {
    Ok(match e {
        NonNumExpr::Bool(b) => AttributeValue::Boolean(*b),
        NonNumExpr::Str(s) => AttributeValue::Text(s.clone()),
        NonNumExpr::Attr(i, name) => {
            let idx = eval_index(i, ctx)?;
            match ctx.trace.attribute(idx, name) {
                v @ (AttributeValue::Text(_) | AttributeValue::Boolean(_)) => v.clone(),
                _ => AttributeValue::Undefined,
            }
        }
        NonNumExpr::Concat {
            source,
            var,
            range,
            cond,
        } => {
            let (st, ed) = eval_range(range, ctx)?;
            let mut out = String::new();
            for d in st.max(1)..=ed {
                ctx.valuation.bind(var, d);
                let r = (|| -> Result<Option<String>, EvalError> {
                    if !eval_cond(cond, ctx)? {
                        return Ok(None);
                    }
                    Ok(match eval_nonnum(source, ctx)? {
                        AttributeValue::Text(s) => Some(s),
                        AttributeValue::Boolean(b) => Some(b.to_string()),
                        _ => None,
                    })
                })();
                ctx.valuation.pop();
                if let Some(s) = r? {
                    out.push_str(&s);
                }
            }
            AttributeValue::Text(out)
        }
    })
}

fn nonnum_eq(a: &AttributeValue, b: &AttributeValue) -> Option<bool> {
    match (a, b) {
        (AttributeValue::Text(x), AttributeValue::Text(y)) => Some(x == y),
        (AttributeValue::Boolean(x), AttributeValue::Boolean(y)) => Some(x == y),
        _ => None,
    }
}

fn compare_values(op: CmpOp, a: &AttributeValue, b: &AttributeValue) -> bool {
    if let (Some(x), Some(y)) = (a.as_number(), b.as_number()) {
        return op.apply(&x, &y);
    }
    match (op, nonnum_eq(a, b)) {
        (CmpOp::Eq, Some(eq)) => eq,
        (CmpOp::Ne, Some(eq)) => !eq,
        _ => false,
    }
}

pub fn eval_event_expr<'v>(e: &'v EventExpr, ctx: &mut EvalContext<'_, 'v>) -> Result<bool, EvalError> {
    Ok(match e {
        EventExpr::Bool(b) => *b,
        EventExpr::Num(op, a, b) => match (eval_num(a, ctx)?, eval_num(b, ctx)?) {
            (Some(x), Some(y)) => op.apply(&x, &y),
            _ => false,
        },
        EventExpr::NonNum(op, a, b) => {
            let (x, y) = (eval_nonnum(a, ctx)?, eval_nonnum(b, ctx)?);
            match (op, nonnum_eq(&x, &y)) {
                (CmpOp::Eq, Some(eq)) => eq,
                (CmpOp::Ne, Some(eq)) => !eq,
                _ => false,
            }
        }
        EventExpr::AttrCompare(op, (i, a), (j, b)) => {
            let x = ctx.trace.attribute(eval_index(i, ctx)?, a);
            let y = ctx.trace.attribute(eval_index(j, ctx)?, b);
            compare_values(*op, x, y)
        }
    })
}

fn eval_cond<'v>(c: &'v AggCond, ctx: &mut EvalContext<'_, 'v>) -> Result<bool, EvalError> {
    Ok(match c {
        AggCond::Atom(e) => eval_event_expr(e, ctx)?,
        AggCond::Not(a) => !eval_cond(a, ctx)?,
        AggCond::And(a, b) => eval_cond(a, ctx)? && eval_cond(b, ctx)?,
        AggCond::Or(a, b) => eval_cond(a, ctx)? || eval_cond(b, ctx)?,
    })
}

fn eval_range(r: &Range, ctx: &EvalContext<'_, '_>) -> Result<(i64, i64), EvalError> {
    Ok((eval_index(&r.start, ctx)?, eval_index(&r.end, ctx)?))
}

/// Positions `d ≥ 1` in the range where the condition holds and, for sum/avg/min/max,
/// the source is defined. For `count` only the condition matters; for `countval`, the
/// positions where the attribute is defined.
pub fn valid_agg_indices<'v>(e: &'v NumExpr, ctx: &mut EvalContext<'_, 'v>) -> Result<Vec<i64>, EvalError> {
    match e {
        NumExpr::Agg {
            source,
            var,
            range,
            cond,
            ..
        } => collect_indices(var, range, Some(cond), ctx, |ctx| Ok(eval_num(source, ctx)?.is_some())),
        NumExpr::Count { cond, var, range } => collect_indices(var, range, Some(cond), ctx, |_| Ok(true)),
        NumExpr::CountVal { attr, range } => {
            let (st, ed) = eval_range(range, ctx)?;
            Ok((st.max(1)..=ed)
                .filter(|&d| !ctx.trace.attribute(d, attr).is_undefined())
                .collect())
        }
        _ => Err(EvalError::NotAnAggregate),
    }
}

fn collect_indices<'v>(
    var: &'v str,
    range: &'v Range,
    cond: Option<&'v AggCond>,
    ctx: &mut EvalContext<'_, 'v>,
    mut keep: impl FnMut(&mut EvalContext<'_, 'v>) -> Result<bool, EvalError>,
) -> Result<Vec<i64>, EvalError> {
    let (st, ed) = eval_range(range, ctx)?;
    let mut out = Vec::new();
    for d in st.max(1)..=ed {
        ctx.valuation.bind(var, d);
        let r = (|| {
            if let Some(c) = cond {
                if !eval_cond(c, ctx)? {
                    return Ok(false);
                }
            }
            keep(ctx)
        })();
        ctx.valuation.pop();
        if r? {
            out.push(d);
        }
    }
    Ok(out)
}

fn value_key(v: &AttributeValue) -> Option<(u8, String)> {
    Some(match v {
        AttributeValue::Text(s) => (0, s.clone()),
        AttributeValue::Number(x) => (1, (if *x == 0.0 { 0.0 } else { *x }).to_bits().to_string()),
        AttributeValue::Boolean(b) => (2, b.to_string()),
        AttributeValue::Timestamp(t) => (3, t.to_string()),
        AttributeValue::Undefined => return None,
    })
}

/// Evaluates an aggregate (`sum`, `avg`, `min`, `max`, `count`, `countval`) to a Number or ⊥.
pub fn eval_aggregate<'v>(e: &'v NumExpr, ctx: &mut EvalContext<'_, 'v>) -> Result<AttributeValue, EvalError> {
    match e {
        NumExpr::Agg { op, source, var, .. } => {
            let idx = valid_agg_indices(e, ctx)?;
            if idx.is_empty() {
                return Ok(AttributeValue::Undefined);
            }
            let mut values = Vec::with_capacity(idx.len());
            for d in idx {
                ctx.valuation.bind(var, d);
                let v = eval_num(source, ctx);
                ctx.valuation.pop();
                values.extend(v?);
            }
            let n = values.len() as f64;
            let r = match op {
                AggOp::Sum => values.iter().sum(),
                AggOp::Avg => values.iter().sum::<f64>() / n,
                AggOp::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
                AggOp::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            Ok(AttributeValue::Number(r))
        }
        NumExpr::Count { .. } => Ok(AttributeValue::Number(valid_agg_indices(e, ctx)?.len() as f64)),
        NumExpr::CountVal { attr, range } => {
            let (st, ed) = eval_range(range, ctx)?;
            let distinct: HashSet<_> = (st.max(1)..=ed)
                .filter_map(|d| value_key(ctx.trace.attribute(d, attr)))
                .collect();
            Ok(AttributeValue::Number(distinct.len() as f64))
        }
        _ => Err(EvalError::NotAnAggregate),
    }
}

/// Truth of a formula under the context's valuation. Quantifiers range over `1..=|τ|`.
pub fn holds<'v>(f: &'v FoeFormula, ctx: &mut EvalContext<'_, 'v>) -> Result<bool, EvalError> {
    Ok(match f {
        FoeFormula::Atom(e) => eval_event_expr(e, ctx)?,
        FoeFormula::Not(a) => !holds(a, ctx)?,
        FoeFormula::And(a, b) => holds(a, ctx)? && holds(b, ctx)?,
        FoeFormula::Or(a, b) => holds(a, ctx)? || holds(b, ctx)?,
        FoeFormula::Implies(a, b) => !holds(a, ctx)? || holds(b, ctx)?,
        FoeFormula::Forall(v, body) | FoeFormula::Exists(v, body) => {
            let universal = matches!(f, FoeFormula::Forall(..));
            let n = ctx.len();
            let mut result = universal;
            for c in 1..=n {
                ctx.valuation.bind(v, c);
                let r = holds(body, ctx);
                ctx.valuation.pop();
                if r? != universal {
                    result = !universal;
                    break;
                }
            }
            result
        }
    })
}

fn check_k(trace: &Trace, k: usize) -> Result<(), EvalError> {
    if k < 1 || k > trace.len() {
        return Err(EvalError::PrefixOutOfRange { k, len: trace.len() });
    }
    Ok(())
}

/// `pref_k(τ) ⊨ φ` for a closed formula.
pub fn satisfies(f: &FoeFormula, trace: &Trace, k: usize) -> Result<bool, EvalError> {
    let free = f.free_vars();
    if !free.is_empty() {
        return Err(EvalError::NotClosed(free.into_iter().collect()));
    }
    check_k(trace, k)?;
    holds(f, &mut EvalContext::new(trace, k))
}

pub fn eval_target(t: &TargetExpr, trace: &Trace, k: usize) -> Result<AttributeValue, EvalError> {
    let mut ctx = EvalContext::new(trace, k);
    Ok(match t {
        TargetExpr::Num(e) => match eval_num(e, &mut ctx)? {
            Some(x) => AttributeValue::Number(x),
            None => AttributeValue::Undefined,
        },
        TargetExpr::NonNum(e) => eval_nonnum(e, &mut ctx)?,
    })
}

/// The target of the first satisfied condition, or the default target.
pub fn apply_rule(rule: &AnalyticRule, trace: &Trace, k: usize) -> Result<AttributeValue, EvalError> {
    check_k(trace, k)?;
    for (cond, target) in &rule.cases {
        if satisfies(cond, trace, k)? {
            return eval_target(target, trace, k);
        }
    }
    eval_target(&rule.default, trace, k)
}

/// A rule prepared for labeling many prefixes of one trace: conditions that do not
/// mention `curr` are decided once per trace.
pub struct PreparedRule<'r> {
    rule: &'r AnalyticRule,
    depends_on_k: Vec<bool>,
}

impl<'r> PreparedRule<'r> {
    pub fn new(rule: &'r AnalyticRule) -> Self {
        let depends_on_k = rule.cases.iter().map(|(c, _)| c.mentions_curr()).collect();
        PreparedRule { rule, depends_on_k }
    }

    /// Same result as calling [`apply_rule`] for every `k` in `ks`.
    pub fn apply_all(&self, trace: &Trace, ks: &[usize]) -> Result<Vec<AttributeValue>, EvalError> {
        for &k in ks {
            check_k(trace, k)?;
        }
        let mut fixed: Vec<Option<bool>> = vec![None; self.rule.cases.len()];
        let mut out = Vec::with_capacity(ks.len());
        for &k in ks {
            let mut chosen = &self.rule.default;
            for (i, (cond, target)) in self.rule.cases.iter().enumerate() {
                let sat = if self.depends_on_k[i] {
                    satisfies(cond, trace, k)?
                } else {
                    match fixed[i] {
                        Some(s) => s,
                        None => {
                            let s = satisfies(cond, trace, k)?;
                            fixed[i] = Some(s);
                            s
                        }
                    }
                };
                if sat {
                    chosen = target;
                    break;
                }
            }
            out.push(eval_target(chosen, trace, k)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub trace_id: String,
    pub k: usize,
    /// 0-based indices of the satisfied cases.
    pub cases: Vec<usize>,
    pub values: Vec<AttributeValue>,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cases: Vec<_> = self.cases.iter().map(|c| (c + 1).to_string()).collect();
        let values: Vec<_> = self.values.iter().map(|v| v.render()).collect();
        write!(
            f,
            "trace {} k={}: cases {} give {}",
            self.trace_id,
            self.k,
            cases.join(","),
            values.join(" / ")
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WellDefinednessReport {
    pub violations: Vec<Conflict>,
}

impl WellDefinednessReport {
    pub fn is_well_defined(&self) -> bool {
        self.violations.is_empty()
    }
}

fn same_value(a: &AttributeValue, b: &AttributeValue) -> bool {
    match (a, b) {
        (AttributeValue::Number(x), AttributeValue::Number(y)) => x == y || (x.is_nan() && y.is_nan()),
        _ => a == b,
    }
}

/// Checks that, for every trace and every `k` in `1..=|τ|`, all satisfied conditions yield the same target value.
pub fn check_well_defined(rule: &AnalyticRule, log: &EventLog) -> Result<WellDefinednessReport, EvalError> {
    let mut report = WellDefinednessReport::default();
    if rule.cases.len() < 2 {
        return Ok(report);
    }
    for trace in &log.traces {
        for k in 1..=trace.len() {
            let mut cases = Vec::new();
            let mut values = Vec::new();
            for (i, (cond, target)) in rule.cases.iter().enumerate() {
                if satisfies(cond, trace, k)? {
                    cases.push(i);
                    values.push(eval_target(target, trace, k)?);
                }
            }
            if values.windows(2).any(|w| !same_value(&w[0], &w[1])) {
                report.violations.push(Conflict {
                    trace_id: trace.id.clone(),
                    k,
                    cases,
                    values,
                });
            }
        }
    }
    Ok(report)
}

/// Replaces every quantifier by the finite disjunction / conjunction over `1..=len`.
pub fn expand_quantifiers(f: &FoeFormula, len: usize) -> FoeFormula {
    match f {
        FoeFormula::Atom(_) => f.clone(),
        FoeFormula::Not(a) => FoeFormula::not(expand_quantifiers(a, len)),
        FoeFormula::And(a, b) => FoeFormula::and(expand_quantifiers(a, len), expand_quantifiers(b, len)),
        FoeFormula::Or(a, b) => FoeFormula::or(expand_quantifiers(a, len), expand_quantifiers(b, len)),
        FoeFormula::Implies(a, b) => FoeFormula::implies(expand_quantifiers(a, len), expand_quantifiers(b, len)),
        FoeFormula::Forall(v, body) | FoeFormula::Exists(v, body) => {
            let universal = matches!(f, FoeFormula::Forall(..));
            let parts: Vec<FoeFormula> = (1..=len as u64)
                .map(|c| expand_quantifiers(&body.substitute(v, &IndexExpr::Const(c)), len))
                .collect();
            parts
                .into_iter()
                .reduce(|a, b| {
                    if universal {
                        FoeFormula::and(a, b)
                    } else {
                        FoeFormula::or(a, b)
                    }
                })
                .unwrap_or(FoeFormula::Atom(EventExpr::Bool(universal)))
        }
    }
}
