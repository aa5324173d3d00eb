//! Abstract syntax of FOE formulas, expressions and analytic rules, with static validation.

use std::collections::BTreeSet;
use std::fmt;

use crate::event_log::format_number;

/// Index expressions: `i`, positive constants, `curr`, `last`, and sums/differences thereof.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexExpr {
    Var(String),
    Const(u64),
    Curr,
    Last,
    Add(Box<IndexExpr>, Box<IndexExpr>),
    Sub(Box<IndexExpr>, Box<IndexExpr>),
}

/// Aggregation range `st:ed`. Bounds are variable-free index expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub start: IndexExpr,
    pub end: IndexExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggOp {
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    Lit(f64),
    Index(IndexExpr),
    Attr(IndexExpr, String),
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    Agg {
        op: AggOp,
        source: Box<NumExpr>,
        var: String,
        range: Range,
        cond: Box<AggCond>,
    },
    Min2(Box<NumExpr>, Box<NumExpr>),
    Max2(Box<NumExpr>, Box<NumExpr>),
    Count {
        cond: Box<AggCond>,
        var: String,
        range: Range,
    },
    CountVal {
        attr: String,
        range: Range,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonNumExpr {
    Bool(bool),
    Str(String),
    Attr(IndexExpr, String),
    Concat {
        source: Box<NonNumExpr>,
        var: String,
        range: Range,
        cond: Box<AggCond>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggCond {
    Atom(EventExpr),
    Not(Box<AggCond>),
    And(Box<AggCond>, Box<AggCond>),
    Or(Box<AggCond>, Box<AggCond>),
}

impl AggCond {
    pub fn always() -> Self {
        AggCond::Atom(EventExpr::Bool(true))
    }

    pub fn is_trivially_true(&self) -> bool {
        matches!(self, AggCond::Atom(EventExpr::Bool(true)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventExpr {
    Bool(bool),
    Num(CmpOp, NumExpr, NumExpr),
    NonNum(CmpOp, NonNumExpr, NonNumExpr),
    /// `e[i].a == e[j].b` / `!=` between two accessors, whose kind is only known at runtime.
    AttrCompare(CmpOp, (IndexExpr, String), (IndexExpr, String)),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoeFormula {
    Atom(EventExpr),
    Not(Box<FoeFormula>),
    And(Box<FoeFormula>, Box<FoeFormula>),
    Or(Box<FoeFormula>, Box<FoeFormula>),
    Implies(Box<FoeFormula>, Box<FoeFormula>),
    Forall(String, Box<FoeFormula>),
    Exists(String, Box<FoeFormula>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum RuleKind {
    Numeric,
    NonNumeric,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Numeric => "numeric",
            RuleKind::NonNumeric => "non-numeric",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetExpr {
    Num(NumExpr),
    NonNum(NonNumExpr),
}

impl TargetExpr {
    pub fn kind(&self) -> RuleKind {
        match self {
            TargetExpr::Num(_) => RuleKind::Numeric,
            TargetExpr::NonNum(_) => RuleKind::NonNumeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRule {
    pub cases: Vec<(FoeFormula, TargetExpr)>,
    pub default: TargetExpr,
    pub kind: RuleKind,
}

impl AnalyticRule {
    /// The rule kind is taken from the default target; `validate` reports disagreement.
    pub fn new(cases: Vec<(FoeFormula, TargetExpr)>, default: TargetExpr) -> Self {
        let kind = default.kind();
        AnalyticRule { cases, default, kind }
    }

    pub fn targets(&self) -> impl Iterator<Item = &TargetExpr> {
        self.cases.iter().map(|(_, t)| t).chain(std::iter::once(&self.default))
    }
}

// ---------------------------------------------------------------------------
// Variable bookkeeping

#[allow(clippy::should_implement_trait)]
impl IndexExpr {
    pub fn add(a: IndexExpr, b: IndexExpr) -> Self {
        IndexExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: IndexExpr, b: IndexExpr) -> Self {
        IndexExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn var(name: &str) -> Self {
        IndexExpr::Var(name.to_string())
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            IndexExpr::Var(v) => out.push(v.clone()),
            IndexExpr::Add(a, b) | IndexExpr::Sub(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            _ => {}
        }
    }

    pub fn mentions_curr(&self) -> bool {
        match self {
            IndexExpr::Curr => true,
            IndexExpr::Add(a, b) | IndexExpr::Sub(a, b) => a.mentions_curr() || b.mentions_curr(),
            _ => false,
        }
    }

    fn substitute(&self, var: &str, with: &IndexExpr) -> IndexExpr {
        match self {
            IndexExpr::Var(v) if v == var => with.clone(),
            IndexExpr::Add(a, b) => IndexExpr::add(a.substitute(var, with), b.substitute(var, with)),
            IndexExpr::Sub(a, b) => IndexExpr::sub(a.substitute(var, with), b.substitute(var, with)),
            other => other.clone(),
        }
    }
}

impl Range {
    pub fn new(start: IndexExpr, end: IndexExpr) -> Self {
        Range { start, end }
    }

    fn mentions_curr(&self) -> bool {
        self.start.mentions_curr() || self.end.mentions_curr()
    }
}

/// Free index variables of an expression tree, in first-occurrence order (duplicates kept).
trait Vars {
    fn free_vars_into(&self, out: &mut Vec<String>);
    fn mentions_curr(&self) -> bool;
    fn substitute(&self, var: &str, with: &IndexExpr) -> Self
    where
        Self: Sized;
}

fn agg_scope_vars(var: &str, range: &Range, inner: &mut Vec<String>, out: &mut Vec<String>) {
    range.start.collect_vars(out);
    range.end.collect_vars(out);
    out.extend(inner.drain(..).filter(|v| v != var));
}

impl Vars for NumExpr {
    fn free_vars_into(&self, out: &mut Vec<String>) {
        match self {
            NumExpr::Lit(_) => {}
            NumExpr::Index(i) | NumExpr::Attr(i, _) => i.collect_vars(out),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Min2(a, b) | NumExpr::Max2(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            NumExpr::Agg {
                source,
                var,
                range,
                cond,
                ..
            } => {
                let mut inner = Vec::new();
                source.free_vars_into(&mut inner);
                cond.free_vars_into(&mut inner);
                agg_scope_vars(var, range, &mut inner, out);
            }
            NumExpr::Count { cond, var, range } => {
                let mut inner = Vec::new();
                cond.free_vars_into(&mut inner);
                agg_scope_vars(var, range, &mut inner, out);
            }
            NumExpr::CountVal { range, .. } => {
                range.start.collect_vars(out);
                range.end.collect_vars(out);
            }
        }
    }

    fn mentions_curr(&self) -> bool {
        match self {
            NumExpr::Lit(_) => false,
            NumExpr::Index(i) | NumExpr::Attr(i, _) => i.mentions_curr(),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Min2(a, b) | NumExpr::Max2(a, b) => {
                a.mentions_curr() || b.mentions_curr()
            }
            NumExpr::Agg {
                source, range, cond, ..
            } => source.mentions_curr() || range.mentions_curr() || cond.mentions_curr(),
            NumExpr::Count { cond, range, .. } => range.mentions_curr() || cond.mentions_curr(),
            NumExpr::CountVal { range, .. } => range.mentions_curr(),
        }
    }

    fn substitute(&self, v: &str, with: &IndexExpr) -> Self {
        let s = |e: &NumExpr| Box::new(e.substitute(v, with));
        let sr = |r: &Range| Range::new(r.start.substitute(v, with), r.end.substitute(v, with));
        match self {
            NumExpr::Lit(x) => NumExpr::Lit(*x),
            NumExpr::Index(i) => NumExpr::Index(i.substitute(v, with)),
            NumExpr::Attr(i, a) => NumExpr::Attr(i.substitute(v, with), a.clone()),
            NumExpr::Add(a, b) => NumExpr::Add(s(a), s(b)),
            NumExpr::Sub(a, b) => NumExpr::Sub(s(a), s(b)),
            NumExpr::Min2(a, b) => NumExpr::Min2(s(a), s(b)),
            NumExpr::Max2(a, b) => NumExpr::Max2(s(a), s(b)),
            NumExpr::Agg {
                op,
                source,
                var,
                range,
                cond,
            } => {
                let shadowed = var == v;
                NumExpr::Agg {
                    op: *op,
                    source: if shadowed { source.clone() } else { s(source) },
                    var: var.clone(),
                    range: sr(range),
                    cond: if shadowed {
                        cond.clone()
                    } else {
                        Box::new(cond.substitute(v, with))
                    },
                }
            }
            NumExpr::Count { cond, var, range } => NumExpr::Count {
                cond: if var == v {
                    cond.clone()
                } else {
                    Box::new(cond.substitute(v, with))
                },
                var: var.clone(),
                range: sr(range),
            },
            NumExpr::CountVal { attr, range } => NumExpr::CountVal {
                attr: attr.clone(),
                range: sr(range),
            },
        }
    }
}

impl Vars for NonNumExpr {
    fn free_vars_into(&self, out: &mut Vec<String>) {
        match self {
            NonNumExpr::Bool(_) | NonNumExpr::Str(_) => {}
            NonNumExpr::Attr(i, _) => i.collect_vars(out),
            NonNumExpr::Concat {
                source,
                var,
                range,
                cond,
            } => {
                let mut inner = Vec::new();
                source.free_vars_into(&mut inner);
                cond.free_vars_into(&mut inner);
                agg_scope_vars(var, range, &mut inner, out);
            }
        }
    }

    fn mentions_curr(&self) -> bool {
        match self {
            NonNumExpr::Bool(_) | NonNumExpr::Str(_) => false,
            NonNumExpr::Attr(i, _) => i.mentions_curr(),
            NonNumExpr::Concat {
                source, range, cond, ..
            } => source.mentions_curr() || range.mentions_curr() || cond.mentions_curr(),
        }
    }

    fn substitute(&self, v: &str, with: &IndexExpr) -> Self {
        match self {
            NonNumExpr::Attr(i, a) => NonNumExpr::Attr(i.substitute(v, with), a.clone()),
            NonNumExpr::Concat {
                source,
                var,
                range,
                cond,
            } => {
                let shadowed = var == v;
                NonNumExpr::Concat {
                    source: if shadowed {
                        source.clone()
                    } else {
                        Box::new(source.substitute(v, with))
                    },
                    var: var.clone(),
                    range: Range::new(range.start.substitute(v, with), range.end.substitute(v, with)),
                    cond: if shadowed {
                        cond.clone()
                    } else {
                        Box::new(cond.substitute(v, with))
                    },
                }
            }
            other => other.clone(),
        }
    }
}

impl Vars for EventExpr {
    fn free_vars_into(&self, out: &mut Vec<String>) {
        match self {
            EventExpr::Bool(_) => {}
            EventExpr::Num(_, a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            EventExpr::NonNum(_, a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            EventExpr::AttrCompare(_, (i, _), (j, _)) => {
                i.collect_vars(out);
                j.collect_vars(out);
            }
        }
    }

    fn mentions_curr(&self) -> bool {
        match self {
            EventExpr::Bool(_) => false,
            EventExpr::Num(_, a, b) => a.mentions_curr() || b.mentions_curr(),
            EventExpr::NonNum(_, a, b) => a.mentions_curr() || b.mentions_curr(),
            EventExpr::AttrCompare(_, (i, _), (j, _)) => i.mentions_curr() || j.mentions_curr(),
        }
    }

    fn substitute(&self, v: &str, with: &IndexExpr) -> Self {
        match self {
            EventExpr::Bool(b) => EventExpr::Bool(*b),
            EventExpr::Num(op, a, b) => EventExpr::Num(*op, a.substitute(v, with), b.substitute(v, with)),
            EventExpr::NonNum(op, a, b) => EventExpr::NonNum(*op, a.substitute(v, with), b.substitute(v, with)),
            EventExpr::AttrCompare(op, (i, a), (j, b)) => EventExpr::AttrCompare(
                *op,
                (i.substitute(v, with), a.clone()),
                (j.substitute(v, with), b.clone()),
            ),
        }
    }
}

impl Vars for AggCond {
    fn free_vars_into(&self, out: &mut Vec<String>) {
        match self {
            AggCond::Atom(e) => e.free_vars_into(out),
            AggCond::Not(a) => a.free_vars_into(out),
            AggCond::And(a, b) | AggCond::Or(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
        }
    }

    fn mentions_curr(&self) -> bool {
        match self {
            AggCond::Atom(e) => e.mentions_curr(),
            AggCond::Not(a) => a.mentions_curr(),
            AggCond::And(a, b) | AggCond::Or(a, b) => a.mentions_curr() || b.mentions_curr(),
        }
    }

    fn substitute(&self, v: &str, with: &IndexExpr) -> Self {
        match self {
            AggCond::Atom(e) => AggCond::Atom(e.substitute(v, with)),
            AggCond::Not(a) => AggCond::Not(Box::new(a.substitute(v, with))),
            AggCond::And(a, b) => AggCond::And(Box::new(a.substitute(v, with)), Box::new(b.substitute(v, with))),
            AggCond::Or(a, b) => AggCond::Or(Box::new(a.substitute(v, with)), Box::new(b.substitute(v, with))),
        }
    }
}

impl NumExpr {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut v = Vec::new();
        self.free_vars_into(&mut v);
        v.into_iter().collect()
    }

    pub fn mentions_curr(&self) -> bool {
        Vars::mentions_curr(self)
    }
}

impl NonNumExpr {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut v = Vec::new();
        self.free_vars_into(&mut v);
        v.into_iter().collect()
    }
}

impl TargetExpr {
    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            TargetExpr::Num(e) => e.free_vars(),
            TargetExpr::NonNum(e) => e.free_vars(),
        }
    }

    pub fn mentions_curr(&self) -> bool {
        match self {
            TargetExpr::Num(e) => Vars::mentions_curr(e),
            TargetExpr::NonNum(e) => Vars::mentions_curr(e),
        }
    }
}

#[allow(clippy::should_implement_trait)]
impl FoeFormula {
    pub fn atom(e: EventExpr) -> Self {
        FoeFormula::Atom(e)
    }

    pub fn not(a: FoeFormula) -> Self {
        FoeFormula::Not(Box::new(a))
    }

    pub fn and(a: FoeFormula, b: FoeFormula) -> Self {
        FoeFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: FoeFormula, b: FoeFormula) -> Self {
        FoeFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: FoeFormula, b: FoeFormula) -> Self {
        FoeFormula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(v: &str, a: FoeFormula) -> Self {
        FoeFormula::Forall(v.to_string(), Box::new(a))
    }

    pub fn exists(v: &str, a: FoeFormula) -> Self {
        FoeFormula::Exists(v.to_string(), Box::new(a))
    }

    fn free_vars_into(&self, out: &mut Vec<String>) {
        match self {
            FoeFormula::Atom(e) => e.free_vars_into(out),
            FoeFormula::Not(a) => a.free_vars_into(out),
            FoeFormula::And(a, b) | FoeFormula::Or(a, b) | FoeFormula::Implies(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            FoeFormula::Forall(v, a) | FoeFormula::Exists(v, a) => {
                let mut inner = Vec::new();
                a.free_vars_into(&mut inner);
                out.extend(inner.into_iter().filter(|x| x != v));
            }
        }
    }

    /// Free index variables (aggregation variables are bound by their aggregate).
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut v = Vec::new();
        self.free_vars_into(&mut v);
        v.into_iter().collect()
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Whether the formula's truth can depend on the prefix length.
    pub fn mentions_curr(&self) -> bool {
        match self {
            FoeFormula::Atom(e) => e.mentions_curr(),
            FoeFormula::Not(a) | FoeFormula::Forall(_, a) | FoeFormula::Exists(_, a) => a.mentions_curr(),
            FoeFormula::And(a, b) | FoeFormula::Or(a, b) | FoeFormula::Implies(a, b) => {
                a.mentions_curr() || b.mentions_curr()
            }
        }
    }

    /// Capture-avoiding only in the sense that rebinding `var` shadows it; callers
    /// substitute closed index expressions (constants) so capture cannot occur.
    pub fn substitute(&self, var: &str, with: &IndexExpr) -> FoeFormula {
        match self {
            FoeFormula::Atom(e) => FoeFormula::Atom(e.substitute(var, with)),
            FoeFormula::Not(a) => FoeFormula::not(a.substitute(var, with)),
            FoeFormula::And(a, b) => FoeFormula::and(a.substitute(var, with), b.substitute(var, with)),
            FoeFormula::Or(a, b) => FoeFormula::or(a.substitute(var, with), b.substitute(var, with)),
            FoeFormula::Implies(a, b) => FoeFormula::implies(a.substitute(var, with), b.substitute(var, with)),
            FoeFormula::Forall(v, _) | FoeFormula::Exists(v, _) if v == var => self.clone(),
            FoeFormula::Forall(v, a) => FoeFormula::forall(v, a.substitute(var, with)),
            FoeFormula::Exists(v, a) => FoeFormula::exists(v, a.substitute(var, with)),
        }
    }

    /// Number of quantifiers in the formula.
    pub fn quantifier_count(&self) -> usize {
        match self {
            FoeFormula::Atom(_) => 0,
            FoeFormula::Not(a) => a.quantifier_count(),
            FoeFormula::And(a, b) | FoeFormula::Or(a, b) | FoeFormula::Implies(a, b) => {
                a.quantifier_count() + b.quantifier_count()
            }
            FoeFormula::Forall(_, a) | FoeFormula::Exists(_, a) => 1 + a.quantifier_count(),
        }
    }
}

// ---------------------------------------------------------------------------
// Standardizing apart

fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    (1..)
        .map(|n| format!("{base}__{n}"))
        .find(|c| !used.contains(c))
        .expect("unbounded counter")
}

fn all_names(f: &FoeFormula, out: &mut BTreeSet<String>) {
    match f {
        FoeFormula::Atom(e) => {
            let mut v = Vec::new();
            e.free_vars_into(&mut v);
            out.extend(v);
        }
        FoeFormula::Not(a) => all_names(a, out),
        FoeFormula::And(a, b) | FoeFormula::Or(a, b) | FoeFormula::Implies(a, b) => {
            all_names(a, out);
            all_names(b, out);
        }
        FoeFormula::Forall(v, a) | FoeFormula::Exists(v, a) => {
            out.insert(v.clone());
            all_names(a, out);
        }
    }
}

fn apart(f: &FoeFormula, taken: &mut BTreeSet<String>, used: &mut BTreeSet<String>) -> FoeFormula {
    match f {
        FoeFormula::Atom(_) => f.clone(),
        FoeFormula::Not(a) => FoeFormula::not(apart(a, taken, used)),
        FoeFormula::And(a, b) => {
            let a = apart(a, taken, used);
            FoeFormula::and(a, apart(b, taken, used))
        }
        FoeFormula::Or(a, b) => {
            let a = apart(a, taken, used);
            FoeFormula::or(a, apart(b, taken, used))
        }
        FoeFormula::Implies(a, b) => {
            let a = apart(a, taken, used);
            FoeFormula::implies(a, apart(b, taken, used))
        }
        FoeFormula::Forall(v, body) | FoeFormula::Exists(v, body) => {
            let (name, body) = if taken.contains(v) {
                let fresh = fresh_name(v, used);
                used.insert(fresh.clone());
                let renamed = body.substitute(v, &IndexExpr::Var(fresh.clone()));
                (fresh, renamed)
            } else {
                (v.clone(), (**body).clone())
            };
            taken.insert(name.clone());
            let body = apart(&body, taken, used);
            match f {
                FoeFormula::Forall(..) => FoeFormula::forall(&name, body),
                _ => FoeFormula::exists(&name, body),
            }
        }
    }
}

/// Renames bound variables so that no two quantifiers bind the same name and no
/// name is both free and bound. Fresh names are `<name>__<n>` with the smallest unused `n`.
pub fn standardize_apart(f: &FoeFormula) -> FoeFormula {
    let mut taken = f.free_vars();
    let mut used = BTreeSet::new();
    all_names(f, &mut used);
    apart(f, &mut taken, &mut used)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    OpenCondition {
        case: usize,
        free: Vec<String>,
    },
    IncoherentTargets {
        kinds: Vec<RuleKind>,
    },
    NestedAggregate {
        location: String,
    },
    ForeignVariableInAggregate {
        aggregate_var: String,
        foreign: Vec<String>,
        location: String,
    },
    QuantifiedAggregationVariable {
        var: String,
        location: String,
    },
    FreeVariableInTarget {
        target: String,
        free: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OpenCondition { case, free } => {
                write!(
                    f,
                    "condition {} is not closed: free variable(s) {}",
                    case + 1,
                    free.join(", ")
                )
            }
            Violation::IncoherentTargets { kinds } => {
                let k: Vec<_> = kinds.iter().map(|k| k.to_string()).collect();
                write!(f, "incoherent targets: mixes {} target expressions", k.join(" and "))
            }
            Violation::NestedAggregate { location } => write!(f, "nested aggregate in {location}"),
            Violation::ForeignVariableInAggregate {
                aggregate_var,
                foreign,
                location,
            } => write!(
                f,
                "aggregate over {aggregate_var} in {location} references other variable(s) {}",
                foreign.join(", ")
            ),
            Violation::QuantifiedAggregationVariable { var, location } => {
                write!(f, "aggregation variable {var} in {location} is also quantified")
            }
            Violation::FreeVariableInTarget { target, free } => {
                write!(f, "{target} contains index variable(s) {}", free.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Checker<'a> {
    out: &'a mut Vec<Violation>,
    location: String,
    /// quantifier variables in scope
    bound: Vec<String>,
}

impl Checker<'_> {
    fn aggregate(&mut self, var: &str, range: &Range, parts: &[&dyn Vars], in_agg: bool) {
        if in_agg {
            self.out.push(Violation::NestedAggregate {
                location: self.location.clone(),
            });
        }
        let mut foreign = Vec::new();
        range.start.collect_vars(&mut foreign);
        range.end.collect_vars(&mut foreign);
        let mut inner = Vec::new();
        for p in parts {
            p.free_vars_into(&mut inner);
        }
        foreign.extend(inner.into_iter().filter(|v| v != var));
        let foreign: Vec<String> = foreign.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if !foreign.is_empty() {
            self.out.push(Violation::ForeignVariableInAggregate {
                aggregate_var: var.to_string(),
                foreign,
                location: self.location.clone(),
            });
        }
        if self.bound.iter().any(|b| b == var) {
            self.out.push(Violation::QuantifiedAggregationVariable {
                var: var.to_string(),
                location: self.location.clone(),
            });
        }
    }

    fn num(&mut self, e: &NumExpr, in_agg: bool) {
        match e {
            NumExpr::Lit(_) | NumExpr::Index(_) | NumExpr::Attr(..) => {}
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Min2(a, b) | NumExpr::Max2(a, b) => {
                self.num(a, in_agg);
                self.num(b, in_agg);
            }
            NumExpr::Agg {
                source,
                var,
                range,
                cond,
                ..
            } => {
                self.aggregate(var, range, &[source.as_ref(), cond.as_ref()], in_agg);
                self.num(source, true);
                self.cond(cond, true);
            }
            NumExpr::Count { cond, var, range } => {
                self.aggregate(var, range, &[cond.as_ref()], in_agg);
                self.cond(cond, true);
            }
            NumExpr::CountVal { range, .. } => {
                if in_agg {
                    self.out.push(Violation::NestedAggregate {
                        location: self.location.clone(),
                    });
                }
                let mut foreign = Vec::new();
                range.start.collect_vars(&mut foreign);
                range.end.collect_vars(&mut foreign);
                if !foreign.is_empty() {
                    self.out.push(Violation::ForeignVariableInAggregate {
                        aggregate_var: String::new(),
                        foreign,
                        location: self.location.clone(),
                    });
                }
            }
        }
    }

    fn nonnum(&mut self, e: &NonNumExpr, in_agg: bool) {
        if let NonNumExpr::Concat {
            source,
            var,
            range,
            cond,
        } = e
        {
            self.aggregate(var, range, &[source.as_ref(), cond.as_ref()], in_agg);
            self.nonnum(source, true);
            self.cond(cond, true);
        }
    }

    fn event(&mut self, e: &EventExpr, in_agg: bool) {
        match e {
            EventExpr::Num(_, a, b) => {
                self.num(a, in_agg);
                self.num(b, in_agg);
            }
            EventExpr::NonNum(_, a, b) => {
                self.nonnum(a, in_agg);
                self.nonnum(b, in_agg);
            }
            _ => {}
        }
    }

    fn cond(&mut self, c: &AggCond, in_agg: bool) {
        match c {
            AggCond::Atom(e) => self.event(e, in_agg),
            AggCond::Not(a) => self.cond(a, in_agg),
            AggCond::And(a, b) | AggCond::Or(a, b) => {
                self.cond(a, in_agg);
                self.cond(b, in_agg);
            }
        }
    }

    fn formula(&mut self, f: &FoeFormula) {
        match f {
            FoeFormula::Atom(e) => self.event(e, false),
            FoeFormula::Not(a) => self.formula(a),
            FoeFormula::And(a, b) | FoeFormula::Or(a, b) | FoeFormula::Implies(a, b) => {
                self.formula(a);
                self.formula(b);
            }
            FoeFormula::Forall(v, a) | FoeFormula::Exists(v, a) => {
                self.bound.push(v.clone());
                self.formula(a);
                self.bound.pop();
            }
        }
    }

    fn target(&mut self, t: &TargetExpr) {
        match t {
            TargetExpr::Num(e) => self.num(e, false),
            TargetExpr::NonNum(e) => self.nonnum(e, false),
        }
    }
}

fn target_label(i: Option<usize>) -> String {
    match i {
        Some(i) => format!("target {}", i + 1),
        None => "default target".to_string(),
    }
}

/// Static checks: closed conditions, coherent targets, aggregate restrictions, no
/// index variables in targets. An empty report means the rule is valid.
pub fn validate(rule: &AnalyticRule) -> ValidationReport {
    let mut out = Vec::new();
    for (i, (cond, _)) in rule.cases.iter().enumerate() {
        let free = cond.free_vars();
        if !free.is_empty() {
            out.push(Violation::OpenCondition {
                case: i,
                free: free.into_iter().collect(),
            });
        }
    }
    let mut kinds: Vec<RuleKind> = Vec::new();
    for t in rule.targets() {
        if !kinds.contains(&t.kind()) {
            kinds.push(t.kind());
        }
    }
    if kinds.len() > 1 {
        out.push(Violation::IncoherentTargets { kinds });
    }
    let n = rule.cases.len();
    for (i, t) in rule.targets().enumerate() {
        let which = if i < n { Some(i) } else { None };
        let free = t.free_vars();
        if !free.is_empty() {
            out.push(Violation::FreeVariableInTarget {
                target: target_label(which),
                free: free.into_iter().collect(),
            });
        }
        let mut c = Checker {
            out: &mut out,
            location: target_label(which),
            bound: Vec::new(),
        };
        c.target(t);
    }
    for (i, (cond, _)) in rule.cases.iter().enumerate() {
        let mut c = Checker {
            out: &mut out,
            location: format!("condition {}", i + 1),
            bound: Vec::new(),
        };
        c.formula(cond);
    }
    ValidationReport { violations: out }
}

// ---------------------------------------------------------------------------
// Pretty printing (the concrete syntax read by the parser)

fn is_bare_attr(name: &str) -> bool {
    let mut parts = name.split(':');
    let first = parts.next().unwrap_or("");
    let ident = |s: &str, lead: bool| {
        !s.is_empty()
            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && (!lead || s.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_'))
    };
    ident(first, true) && parts.all(|p| ident(p, false))
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn attr_name(name: &str) -> String {
    if is_bare_attr(name) {
        name.to_string()
    } else {
        quote(name)
    }
}

impl fmt::Display for IndexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexExpr::Var(v) => f.write_str(v),
            IndexExpr::Const(c) => write!(f, "{c}"),
            IndexExpr::Curr => f.write_str("curr"),
            IndexExpr::Last => f.write_str("last"),
            IndexExpr::Add(a, b) | IndexExpr::Sub(a, b) => {
                let op = if matches!(self, IndexExpr::Add(..)) { "+" } else { "-" };
                if matches!(**b, IndexExpr::Add(..) | IndexExpr::Sub(..)) {
                    write!(f, "{a} {op} ({b})")
                } else {
                    write!(f, "{a} {op} {b}")
                }
            }
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

fn write_agg_tail(f: &mut fmt::Formatter<'_>, var: &str, range: &Range, cond: &AggCond) -> fmt::Result {
    write!(f, " ; where {var} = {range}")?;
    if !cond.is_trivially_true() {
        write!(f, " ; if {cond}")?;
    }
    f.write_str(")")
}

fn num_is_additive(e: &NumExpr) -> bool {
    matches!(e, NumExpr::Add(..) | NumExpr::Sub(..))
        || matches!(e, NumExpr::Index(IndexExpr::Add(..) | IndexExpr::Sub(..)))
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumExpr::Lit(x) => f.write_str(&format_number(*x)),
            NumExpr::Index(i) => write!(f, "{i}"),
            NumExpr::Attr(i, a) => write!(f, "e[{i}].{}", attr_name(a)),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) => {
                let op = if matches!(self, NumExpr::Add(..)) { "+" } else { "-" };
                if num_is_additive(b) {
                    write!(f, "{a} {op} ({b})")
                } else {
                    write!(f, "{a} {op} {b}")
                }
            }
            NumExpr::Min2(a, b) => write!(f, "min2({a}, {b})"),
            NumExpr::Max2(a, b) => write!(f, "max2({a}, {b})"),
            NumExpr::Agg {
                op,
                source,
                var,
                range,
                cond,
            } => {
                let name = match op {
                    AggOp::Sum => "sum",
                    AggOp::Avg => "avg",
                    AggOp::Min => "min",
                    AggOp::Max => "max",
                };
                write!(f, "{name}({source}")?;
                write_agg_tail(f, var, range, cond)
            }
            NumExpr::Count { cond, var, range } => write!(f, "count({cond} ; where {var} = {range})"),
            NumExpr::CountVal { attr, range } => write!(f, "countval({} ; within {range})", attr_name(attr)),
        }
    }
}

impl fmt::Display for NonNumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonNumExpr::Bool(b) => write!(f, "{b}"),
            NonNumExpr::Str(s) => f.write_str(&quote(s)),
            NonNumExpr::Attr(i, a) => write!(f, "e[{i}].{}", attr_name(a)),
            NonNumExpr::Concat {
                source,
                var,
                range,
                cond,
            } => {
                write!(f, "concat({source}")?;
                write_agg_tail(f, var, range, cond)
            }
        }
    }
}

impl fmt::Display for EventExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventExpr::Bool(b) => write!(f, "{b}"),
            EventExpr::Num(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            EventExpr::NonNum(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            EventExpr::AttrCompare(op, (i, a), (j, b)) => {
                write!(f, "e[{i}].{} {} e[{j}].{}", attr_name(a), op.symbol(), attr_name(b))
            }
        }
    }
}

// precedence: implies 1, or 2, and 3, not 4, atom 5
fn cond_prec(c: &AggCond) -> u8 {
    match c {
        AggCond::Or(..) => 2,
        AggCond::And(..) => 3,
        AggCond::Not(..) => 4,
        AggCond::Atom(_) => 5,
    }
}

fn write_cond(f: &mut fmt::Formatter<'_>, c: &AggCond, min: u8) -> fmt::Result {
    if cond_prec(c) < min {
        f.write_str("(")?;
        write_cond(f, c, 0)?;
        return f.write_str(")");
    }
    match c {
        AggCond::Atom(e) => write!(f, "{e}"),
        AggCond::Not(a) => {
            f.write_str("not ")?;
            write_cond(f, a, 4)
        }
        AggCond::And(a, b) => {
            write_cond(f, a, 3)?;
            f.write_str(" and ")?;
            write_cond(f, b, 4)
        }
        AggCond::Or(a, b) => {
            write_cond(f, a, 2)?;
            f.write_str(" or ")?;
            write_cond(f, b, 3)
        }
    }
}

impl fmt::Display for AggCond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cond(f, self, 0)
    }
}

fn formula_prec(x: &FoeFormula) -> u8 {
    match x {
        FoeFormula::Forall(..) | FoeFormula::Exists(..) => 0,
        FoeFormula::Implies(..) => 1,
        FoeFormula::Or(..) => 2,
        FoeFormula::And(..) => 3,
        FoeFormula::Not(..) => 4,
        FoeFormula::Atom(_) => 5,
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, x: &FoeFormula, min: u8) -> fmt::Result {
    if formula_prec(x) < min {
        f.write_str("(")?;
        write_formula(f, x, 0)?;
        return f.write_str(")");
    }
    match x {
        FoeFormula::Atom(e) => write!(f, "{e}"),
        FoeFormula::Not(a) => {
            f.write_str("not ")?;
            write_formula(f, a, 4)
        }
        FoeFormula::And(a, b) => {
            write_formula(f, a, 3)?;
            f.write_str(" and ")?;
            write_formula(f, b, 4)
        }
        FoeFormula::Or(a, b) => {
            write_formula(f, a, 2)?;
            f.write_str(" or ")?;
            write_formula(f, b, 3)
        }
        FoeFormula::Implies(a, b) => {
            write_formula(f, a, 2)?;
            f.write_str(" -> ")?;
            write_formula(f, b, 1)
        }
        FoeFormula::Forall(v, a) | FoeFormula::Exists(v, a) => {
            let q = if matches!(x, FoeFormula::Forall(..)) {
                "forall"
            } else {
                "exists"
            };
            write!(f, "{q} {v} . ")?;
            if matches!(**a, FoeFormula::Forall(..) | FoeFormula::Exists(..)) {
                write_formula(f, a, 0)
            } else {
                f.write_str("(")?;
                write_formula(f, a, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for FoeFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

impl fmt::Display for TargetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetExpr::Num(e) => write!(f, "{e}"),
            TargetExpr::NonNum(e) => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for AnalyticRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rule {{")?;
        for (c, t) in &self.cases {
            writeln!(f, "  {c}")?;
            writeln!(f, "    => {t};")?;
        }
        writeln!(f, "  default {}", self.default)?;
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(a: IndexExpr, b: u64) -> FoeFormula {
        FoeFormula::atom(EventExpr::Num(CmpOp::Gt, NumExpr::Index(a), NumExpr::Lit(b as f64)))
    }

    #[test]
    fn apart_renames_shadowing_quantifier() {
        let f = FoeFormula::forall("i", FoeFormula::exists("i", gt(IndexExpr::var("i"), 3)));
        let g = standardize_apart(&f);
        let want = FoeFormula::forall("i", FoeFormula::exists("i__1", gt(IndexExpr::var("i__1"), 3)));
        assert_eq!(g, want);
        assert_eq!(g.to_string(), "forall i . exists i__1 . (i__1 > 3)");
    }

    #[test]
    fn apart_renames_bound_name_that_is_also_free() {
        let f = FoeFormula::and(
            gt(IndexExpr::var("i"), 5),
            FoeFormula::exists("i", gt(IndexExpr::var("i"), 3)),
        );
        let want = FoeFormula::and(
            gt(IndexExpr::var("i"), 5),
            FoeFormula::exists("i__1", gt(IndexExpr::var("i__1"), 3)),
        );
        assert_eq!(standardize_apart(&f), want);
    }

    #[test]
    fn apart_is_identity_on_apart_formulas() {
        let f = FoeFormula::exists(
            "i",
            FoeFormula::forall("j", gt(IndexExpr::add(IndexExpr::var("i"), IndexExpr::var("j")), 1)),
        );
        assert_eq!(standardize_apart(&f), f);
    }

    #[test]
    fn apart_skips_names_already_used() {
        // i__1 is taken by a sibling quantifier, so the shadowing i becomes i__2
        let f = FoeFormula::and(
            FoeFormula::exists("i__1", gt(IndexExpr::var("i__1"), 1)),
            FoeFormula::forall("i", FoeFormula::exists("i", gt(IndexExpr::var("i"), 2))),
        );
        let g = standardize_apart(&f);
        assert_eq!(
            g.to_string(),
            "(exists i__1 . (i__1 > 1)) and (forall i . exists i__2 . (i__2 > 2))"
        );
    }

    #[test]
    fn validation_findings() {
        let open = AnalyticRule::new(
            vec![(
                FoeFormula::atom(EventExpr::Num(
                    CmpOp::Gt,
                    NumExpr::Attr(IndexExpr::var("i"), "cost".into()),
                    NumExpr::Lit(3.0),
                )),
                TargetExpr::Num(NumExpr::Lit(1.0)),
            )],
            TargetExpr::Num(NumExpr::Lit(0.0)),
        );
        assert_eq!(
            validate(&open).violations,
            vec![Violation::OpenCondition {
                case: 0,
                free: vec!["i".into()]
            }]
        );

        let mixed = AnalyticRule::new(
            vec![(
                FoeFormula::atom(EventExpr::Bool(true)),
                TargetExpr::NonNum(NonNumExpr::Str("Ping-Pong".into())),
            )],
            TargetExpr::Num(NumExpr::Lit(0.0)),
        );
        assert_eq!(
            validate(&mixed).violations,
            vec![Violation::IncoherentTargets {
                kinds: vec![RuleKind::NonNumeric, RuleKind::Numeric]
            }]
        );
    }

    #[test]
    fn aggregate_restrictions() {
        let inner = NumExpr::Agg {
            op: AggOp::Sum,
            source: Box::new(NumExpr::Attr(IndexExpr::var("y"), "cost".into())),
            var: "y".into(),
            range: Range::new(IndexExpr::Const(1), IndexExpr::Last),
            cond: Box::new(AggCond::always()),
        };
        let outer = NumExpr::Agg {
            op: AggOp::Max,
            source: Box::new(NumExpr::Add(
                Box::new(NumExpr::Attr(IndexExpr::var("x"), "cost".into())),
                Box::new(inner),
            )),
            var: "x".into(),
            range: Range::new(IndexExpr::Const(1), IndexExpr::Last),
            cond: Box::new(AggCond::always()),
        };
        let rule = AnalyticRule::new(vec![], TargetExpr::Num(outer));
        let v = validate(&rule).violations;
        assert!(
            v.iter().any(|x| matches!(x, Violation::NestedAggregate { .. })),
            "{v:?}"
        );

        let foreign = NumExpr::Agg {
            op: AggOp::Sum,
            source: Box::new(NumExpr::Attr(IndexExpr::var("i"), "cost".into())),
            var: "x".into(),
            range: Range::new(IndexExpr::Const(1), IndexExpr::Last),
            cond: Box::new(AggCond::always()),
        };
        let f = FoeFormula::exists(
            "i",
            FoeFormula::atom(EventExpr::Num(CmpOp::Gt, foreign, NumExpr::Lit(0.0))),
        );
        let rule = AnalyticRule::new(
            vec![(f, TargetExpr::Num(NumExpr::Lit(1.0)))],
            TargetExpr::Num(NumExpr::Lit(0.0)),
        );
        let v = validate(&rule).violations;
        assert!(
            matches!(&v[..], [Violation::ForeignVariableInAggregate { .. }]),
            "{v:?}"
        );

        let quantified = NumExpr::Count {
            cond: Box::new(AggCond::always()),
            var: "i".into(),
            range: Range::new(IndexExpr::Const(1), IndexExpr::Last),
        };
        let f = FoeFormula::exists(
            "i",
            FoeFormula::atom(EventExpr::Num(
                CmpOp::Gt,
                quantified,
                NumExpr::Index(IndexExpr::var("i")),
            )),
        );
        let rule = AnalyticRule::new(
            vec![(f, TargetExpr::Num(NumExpr::Lit(1.0)))],
            TargetExpr::Num(NumExpr::Lit(0.0)),
        );
        let v = validate(&rule).violations;
        assert!(
            matches!(&v[..], [Violation::QuantifiedAggregationVariable { .. }]),
            "{v:?}"
        );
    }

    #[test]
    fn target_with_index_variable() {
        let rule = AnalyticRule::new(
            vec![],
            TargetExpr::Num(NumExpr::Attr(IndexExpr::var("i"), "cost".into())),
        );
        assert!(matches!(
            &validate(&rule).violations[..],
            [Violation::FreeVariableInTarget { .. }]
        ));
    }
}
