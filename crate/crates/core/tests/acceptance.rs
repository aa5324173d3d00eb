//! Acceptance harness: one PASS/FAIL/SKIP line per criterion.
//!
//! Run with `cargo test --test acceptance`. The optional real-log check reads the
//! BPIC 2013 incidents log from `FOE_PREDICT_BPIC2013` and is reported but does not
//! affect the exit status.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use foe_predict::ast::{AggOp, FoeFormula, IndexExpr, NumExpr};
use foe_predict::corpus;
use foe_predict::encoding::EncoderConfig;
use foe_predict::eval::{apply_rule, eval_aggregate, eval_num, holds, satisfies, valid_agg_indices, EvalContext};
use foe_predict::event_log::{load_xes, AttributeValue, EventLog, Trace};
use foe_predict::labeling::{label_log, LabelOptions};
use foe_predict::ml::{logistic_loss_grad, regression_metrics, train, HoldoutData, Metrics, ModelSpec};
use foe_predict::parser::{parse_formula, parse_num_expr, parse_rule};
use foe_predict::synth::{self, FormulaShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    gating: bool,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn trace_of(id: &str, events: &[&[(&str, AttributeValue)]]) -> Trace {
    Trace::new(
        id,
        events
            .iter()
            .map(|ev| ev.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
            .collect(),
    )
}

fn text(s: &str) -> AttributeValue {
    AttributeValue::Text(s.into())
}

fn num(x: f64) -> AttributeValue {
    AttributeValue::Number(x)
}

// ---------------------------------------------------------------------------
// 1. worked examples

fn worked_examples() -> Outcome {
    let mut bad = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            bad.push(what.to_string());
        }
    };

    // Prefix evaluation: τ = ⟨e3, e7, e6, e4, e5⟩.
    let ids = ["e3", "e7", "e6", "e4", "e5"];
    let evs: Vec<Vec<(&str, AttributeValue)>> = ids.iter().map(|i| vec![("id", text(i))]).collect();
    let refs: Vec<&[(&str, AttributeValue)]> = evs.iter().map(|e| &e[..]).collect();
    let t1 = trace_of("ex1", &refs);
    expect("|τ| = 5", t1.len() == 5);
    expect("τ(3) = e6", t1.attribute(3, "id") == &text("e6"));
    let p2: Vec<&AttributeValue> = t1.prefix(2).iter().map(|e| e.get("id")).collect();
    expect("prefix_2 = ⟨e3, e7⟩", p2 == [&text("e3"), &text("e7")]);
    let last = parse_num_expr("last").unwrap();
    expect(
        "⟦last⟧ = 5",
        eval_num(&last, &mut EvalContext::new(&t1, 2)) == Ok(Some(5.0)),
    );

    // Undefined attributes: e3 has org:resource "Bob" and no org:group.
    let mut evs: Vec<Vec<(&str, AttributeValue)>> = (0..5).map(|_| vec![("org:group", text("g"))]).collect();
    evs[2] = vec![("org:resource", text("Bob"))];
    let refs: Vec<&[(&str, AttributeValue)]> = evs.iter().map(|e| &e[..]).collect();
    let t2 = trace_of("ex2", &refs);
    let r = foe_predict::parser::parse_nonnum_expr("e[3].org:resource").unwrap();
    let g = foe_predict::parser::parse_nonnum_expr("e[3].org:group").unwrap();
    let ctx = || EvalContext::new(&t2, 1);
    expect(
        "e[3].org:resource = Bob",
        foe_predict::eval::eval_nonnum(&r, &mut ctx()) == Ok(text("Bob")),
    );
    expect(
        "e[3].org:group = ⊥",
        foe_predict::eval::eval_nonnum(&g, &mut ctx()) == Ok(AttributeValue::Undefined),
    );

    // Arithmetic and ⊥ absorption.
    let t3 = trace_of("ar", &[&[("a", num(26.0)), ("b", num(86.0))]]);
    let n = |s: &str| eval_num(&parse_num_expr(s).unwrap(), &mut EvalContext::new(&t3, 1)).unwrap();
    expect("26 + 3 = 29", n("e[1].a + 3") == Some(29.0));
    expect("86 - 3 = 83", n("e[1].b - 3") == Some(83.0));
    expect("26 + ⊥ = ⊥", n("e[1].a + e[1].missing").is_none());
    expect(
        "26 >= 3",
        satisfies(&parse_formula("e[1].a >= 3").unwrap(), &t3, 1) == Ok(true),
    );
    expect(
        "comparison with ⊥ is false",
        satisfies(&parse_formula("5 < e[1].missing or 5 != e[1].missing").unwrap(), &t3, 1) == Ok(false),
    );

    // Examples 3 and 4.
    let names = ["initialization", "validation", "assembling", "validation"];
    let evs: Vec<Vec<(&str, AttributeValue)>> = names
        .iter()
        .map(|a| vec![("concept:name", text(a)), ("cost", num(3.0))])
        .collect();
    let refs: Vec<&[(&str, AttributeValue)]> = evs.iter().map(|e| &e[..]).collect();
    let t4 = trace_of("ex3", &refs);
    let s1 = parse_num_expr("sum(e[x].cost ; where x = 1:last)").unwrap();
    let s2 = parse_num_expr(r#"sum(e[x].cost ; where x = 1:last ; if e[x].concept:name == "validation")"#).unwrap();
    for k in 1..=4 {
        let mut c = EvalContext::new(&t4, k);
        expect(
            "Idx1 = {1,2,3,4}",
            valid_agg_indices(&s1, &mut c) == Ok(vec![1, 2, 3, 4]),
        );
        expect("Idx2 = {2,4}", valid_agg_indices(&s2, &mut c) == Ok(vec![2, 4]));
        expect("sum over Idx1 = 12", eval_aggregate(&s1, &mut c) == Ok(num(12.0)));
        expect("sum over Idx2 = 6", eval_aggregate(&s2, &mut c) == Ok(num(6.0)));
    }
    expect(
        "∀i. cost = 3",
        satisfies(&parse_formula("forall i . (e[i].cost == 3)").unwrap(), &t4, 2) == Ok(true),
    );

    check(
        bad.is_empty(),
        if bad.is_empty() {
            "all goldens reproduced".into()
        } else {
            bad.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 2. quantifier elimination oracle

/// Theorems 1 and 2 applied literally: ∀ becomes a conjunction, ∃ a disjunction over 1..=len.
fn expand(f: &FoeFormula, len: usize) -> FoeFormula {
    let over = |v: &str, body: &FoeFormula, join: fn(FoeFormula, FoeFormula) -> FoeFormula| {
        (1..=len as u64)
            .map(|c| expand(&body.substitute(v, &IndexExpr::Const(c)), len))
            .reduce(join)
            .expect("len >= 1")
    };
    match f {
        FoeFormula::Atom(_) => f.clone(),
        FoeFormula::Not(a) => FoeFormula::not(expand(a, len)),
        FoeFormula::And(a, b) => FoeFormula::and(expand(a, len), expand(b, len)),
        FoeFormula::Or(a, b) => FoeFormula::or(expand(a, len), expand(b, len)),
        FoeFormula::Implies(a, b) => FoeFormula::implies(expand(a, len), expand(b, len)),
        FoeFormula::Forall(v, body) => over(v, body, FoeFormula::and),
        FoeFormula::Exists(v, body) => over(v, body, FoeFormula::or),
    }
}

fn quantifier_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut cases, mut agree, mut truths, mut with_q) = (0usize, 0usize, 0usize, 0usize);
    let mut first_bad = None;
    for n in 0..1000 {
        let f = synth::random_formula(&mut rng, FormulaShape::default());
        if f.quantifier_count() > 0 {
            with_q += 1;
        }
        let len = rng.gen_range(1..=6);
        let t = synth::random_trace(&mut rng, "t", len);
        for k in 1..=len {
            let got = satisfies(&f, &t, k).unwrap();
            let flat = expand(&f, len);
            assert_eq!(flat.quantifier_count(), 0);
            let want = holds(&flat, &mut EvalContext::new(&t, k)).unwrap();
            cases += 1;
            truths += want as usize;
            if got == want {
                agree += 1;
            } else if first_bad.is_none() {
                first_bad = Some(format!("formula #{n} `{f}` k={k}: satisfies={got}, expansion={want}"));
            }
        }
    }
    let detail =
        format!("{agree}/{cases} (formula, k) cases agree; 1000 formulas, {with_q} quantified, {truths} true cases");
    match first_bad {
        None => check(agree == cases, detail),
        Some(b) => Outcome::Fail(format!("{detail}; first mismatch {b}")),
    }
}

// ---------------------------------------------------------------------------
// 3. showcase corpus

fn showcase_corpus() -> Outcome {
    let t = synth::showcase_trace();
    let mut bad = Vec::new();
    let mut n = 0;
    for (name, src) in corpus::all() {
        n += 1;
        let rule = match parse_rule(src) {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("{name}: parse {e}"));
                continue;
            }
        };
        let report = foe_predict::ast::validate(&rule);
        if !report.is_valid() {
            bad.push(format!("{name}: {report}"));
        }
        for k in 1..=t.len() {
            if let Err(e) = apply_rule(&rule, &t, k) {
                bad.push(format!("{name} k={k}: {e}"));
            }
        }
    }
    let ok = bad.is_empty() && n == 40 && corpus::SHOWCASE.len() == 31 && corpus::EXPERIMENTS.len() == 9;
    check(
        ok,
        if bad.is_empty() {
            format!("{n} rules on a {}-event trace", t.len())
        } else {
            bad.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 4. row count

fn row_count() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut bad = 0;
    let mut total = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=30);
        let log = synth::random_log(&mut rng, n, 9);
        let cond = synth::random_formula(&mut rng, FormulaShape::default());
        let rule = parse_rule(&format!("rule {{ {cond} => \"yes\"; default \"no\" }}")).unwrap();
        let want: usize = log.traces.iter().map(|t| t.len().saturating_sub(2)).sum();
        // Fitting needs at least one event to build a vocabulary from.
        let (ds, skips, _) = label_log(&rule, &log, &EncoderConfig::one_hot(&["b"]), LabelOptions::default()).unwrap();
        total += ds.len();
        if ds.len() != want || skips.prefixes != want || skips.undefined_target != 0 {
            bad += 1;
        }
    }
    check(bad == 0, format!("100 random logs, {total} rows, {bad} mismatches"))
}

// ---------------------------------------------------------------------------
// 5 and 6. planted patterns

fn holdout(rule: &str, log: &EventLog) -> HoldoutData {
    let rule = corpus::rule(rule).unwrap().unwrap();
    HoldoutData::prepare(
        &rule,
        log,
        &EncoderConfig::default(),
        2.0 / 3.0,
        LabelOptions::default(),
    )
    .unwrap()
}

fn planted_classification() -> Outcome {
    let log = synth::ping_pong_log(1000, 0.3, 0.03, 7);
    let data = holdout("ar01", &log);
    let (tree, _) = data.evaluate(&ModelSpec::tree(10)).unwrap();
    let (zero, _) = data.evaluate(&ModelSpec::ZeroR).unwrap();
    let (auc, acc, z) = (tree.auc().unwrap(), tree.accuracy().unwrap(), zero.auc().unwrap());
    check(
        auc >= 0.90 && acc >= 0.85 && z == 0.5,
        format!("tree AUC {auc:.4} (>= 0.90), accuracy {acc:.4} (>= 0.85), ZeroR AUC {z} (= 0.5)"),
    )
}

fn planted_regression() -> Outcome {
    let log = synth::remaining_time_log(1000, 11);
    let data = holdout("ar02", &log);
    let (tree, _) = data.evaluate(&ModelSpec::tree(10)).unwrap();
    let (zero, _) = data.evaluate(&ModelSpec::ZeroR).unwrap();
    let (t, z) = (tree.mae().unwrap(), zero.mae().unwrap());
    check(
        t < 0.5 * z,
        format!("tree MAE {:.4} h < 0.5 x ZeroR MAE {:.4} h", t / 3.6e6, z / 3.6e6),
    )
}

// ---------------------------------------------------------------------------
// 7. ZeroR invariants

fn zeror_invariants() -> Outcome {
    let runs: Vec<(&str, EventLog)> = vec![
        ("ar01", synth::ping_pong_log(300, 0.3, 0.0, 1)),
        ("ar01", synth::ping_pong_log(300, 0.6, 0.1, 2)),
        ("ar29", synth::remaining_time_log(200, 3)),
        ("ar31", synth::remaining_time_log(200, 4)),
        ("ar25", synth::remaining_time_log(200, 5)),
        ("e3_three_groups", synth::ping_pong_log(200, 0.5, 0.0, 6)),
    ];
    let mut bad = Vec::new();
    for (name, log) in &runs {
        let data = holdout(name, log);
        let model = train(&data.train, &ModelSpec::ZeroR).unwrap();
        let preds = model.predict_all(&data.test.rows).unwrap();
        let m = foe_predict::ml::compute_metrics(&model, &preds, &data.test.targets);
        // Majority of the training labels, ties to the smallest label.
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for l in data.train.labels() {
            *counts.entry(l).or_default() += 1;
        }
        let top = counts.values().max().copied().unwrap();
        let majority = counts.iter().find(|(_, c)| **c == top).unwrap().0.clone();
        let test_labels = data.test.labels();
        let freq = test_labels.iter().filter(|l| **l == majority).count() as f64 / test_labels.len() as f64;
        let (auc, acc) = (m.auc().unwrap(), m.accuracy().unwrap());
        if auc != 0.5 || acc != freq {
            bad.push(format!("{name}: AUC {auc}, accuracy {acc} vs frequency {freq}"));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} classification runs", runs.len())
        } else {
            bad.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 8. BPIC 2013

fn real_log() -> Outcome {
    let Ok(path) = std::env::var("FOE_PREDICT_BPIC2013") else {
        return Outcome::Skip("FOE_PREDICT_BPIC2013 not set".into());
    };
    let log = match load_xes(&path) {
        Ok(l) => l,
        Err(e) => return Outcome::Fail(format!("cannot load {path}: {e}")),
    };
    let rule = corpus::rule("e1_group_change").unwrap().unwrap();
    let data = match HoldoutData::prepare(
        &rule,
        &log,
        &EncoderConfig::default(),
        2.0 / 3.0,
        LabelOptions::default(),
    ) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let (m, _) = data.evaluate(&ModelSpec::tree(10)).unwrap();
    let (auc, acc) = (m.auc().unwrap(), m.accuracy().unwrap());
    check(
        (acc - 0.82).abs() <= 0.05 && auc > 0.60,
        format!(
            "{} traces; tree accuracy {acc:.3} (0.82 ± 0.05), AUC {auc:.3} (> 0.60)",
            log.traces.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. numerical properties

fn numerical() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut notes = Vec::new();
    let mut ok = true;

    // Central differences on the regularized logistic loss.
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (n, d) = (rng.gen_range(5..40), rng.gen_range(1..6));
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..2) as f64).collect();
        let w: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l2 = rng.gen_range(0.0..0.1);
        let (_, g) = logistic_loss_grad(&w, &x, &y, l2);
        let h = 1e-5;
        for j in 0..=d {
            let (mut a, mut b) = (w.clone(), w.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (logistic_loss_grad(&a, &x, &y, l2).0 - logistic_loss_grad(&b, &x, &y, l2).0) / (2.0 * h);
            let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    ok &= worst <= 1e-5;
    notes.push(format!("gradient rel. error {worst:.2e} (<= 1e-5)"));

    let mut mae_gt_rmse = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..50);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        if let Metrics::Regression { mae, rmse, .. } = regression_metrics(&p, &t) {
            if mae > rmse * (1.0 + 1e-12) {
                mae_gt_rmse += 1;
            }
        }
    }
    ok &= mae_gt_rmse == 0;
    notes.push(format!("MAE > RMSE in {mae_gt_rmse}/1000 sets"));

    let (mut checked, mut off, mut empty) = (0, 0, 0);
    while checked < 1000 {
        let NumExpr::Agg {
            source,
            var,
            range,
            cond,
            ..
        } = synth::random_aggregate(&mut rng)
        else {
            continue;
        };
        let with = |op| NumExpr::Agg {
            op,
            source: source.clone(),
            var: var.clone(),
            range: range.clone(),
            cond: cond.clone(),
        };
        let (sum, avg) = (with(AggOp::Sum), with(AggOp::Avg));
        let len = rng.gen_range(1..=8);
        let t = synth::random_trace(&mut rng, "t", len);
        let k = rng.gen_range(1..=len);
        let mut ctx = EvalContext::new(&t, k);
        let idx = valid_agg_indices(&sum, &mut ctx).unwrap().len();
        let (s, a) = (eval_num(&sum, &mut ctx).unwrap(), eval_num(&avg, &mut ctx).unwrap());
        if idx > 0 {
            checked += 1;
        }
        match (s, a) {
            (None, None) if idx == 0 => empty += 1,
            (Some(s), Some(a)) if idx > 0 => {
                if (a * idx as f64 - s).abs() > 1e-9 * s.abs().max(1.0) {
                    off += 1;
                }
            }
            _ => off += 1,
        }
    }
    ok &= off == 0;
    notes.push(format!(
        "avg x |Idx| != sum in {off}/1000 non-empty aggregates (plus {empty} empty, both ⊥)"
    ));
    check(ok, notes.join("; "))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "worked examples",
            limit: Duration::from_secs(1),
            gating: true,
            run: worked_examples,
        },
        Criterion {
            id: 2,
            name: "quantifier expansion oracle",
            limit: Duration::from_secs(30),
            gating: true,
            run: quantifier_oracle,
        },
        Criterion {
            id: 3,
            name: "showcase corpus",
            limit: Duration::from_secs(5),
            gating: true,
            run: showcase_corpus,
        },
        Criterion {
            id: 4,
            name: "dataset row count",
            limit: Duration::from_secs(5),
            gating: true,
            run: row_count,
        },
        Criterion {
            id: 5,
            name: "planted classification",
            limit: Duration::from_secs(60),
            gating: true,
            run: planted_classification,
        },
        Criterion {
            id: 6,
            name: "planted regression",
            limit: Duration::from_secs(60),
            gating: true,
            run: planted_regression,
        },
        Criterion {
            id: 7,
            name: "ZeroR invariants",
            limit: Duration::from_secs(60),
            gating: true,
            run: zeror_invariants,
        },
        Criterion {
            id: 8,
            name: "BPIC 2013 check",
            limit: Duration::from_secs(600),
            gating: false,
            run: real_log,
        },
        Criterion {
            id: 9,
            name: "numerical properties",
            limit: Duration::from_secs(30),
            gating: true,
            run: numerical,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Outcome::Pass(d) if took > c.limit => Outcome::Fail(format!("{d}; took longer than {:?}", c.limit)),
            o => o,
        };
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                if c.gating {
                    failed += 1;
                }
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{}] {}: {detail} ({:.2} s)", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
