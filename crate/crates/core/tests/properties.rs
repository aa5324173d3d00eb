use std::path::Path;

use foe_predict::ast::{standardize_apart, AnalyticRule, FoeFormula, TargetExpr};
use foe_predict::encoding::EncoderConfig;
use foe_predict::eval::{apply_rule, check_well_defined, satisfies};
use foe_predict::event_log::{parse_xes, to_xes_string, EventLog};
use foe_predict::labeling::{label_log, LabelOptions};
use foe_predict::ml::{parse_model, rank_auc, regression_metrics, train, Metrics, ModelSpec};
use foe_predict::parser::{parse_formula, parse_rule};
use foe_predict::synth::{self, FormulaShape};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn formula(seed: u64) -> FoeFormula {
    synth::random_formula(&mut ChaCha8Rng::seed_from_u64(seed), FormulaShape::default())
}

fn log(seed: u64, n: usize) -> EventLog {
    synth::random_log(&mut ChaCha8Rng::seed_from_u64(seed), n, 7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_then_parsing_gives_the_same_formula(seed in any::<u64>(), tseed in any::<u64>()) {
        // Some trees share a spelling (`1 + curr` as a number or as an index), so compare
        // text, the parser's own fixpoint and meaning.
        let f = standardize_apart(&formula(seed));
        let text = f.to_string();
        let back = parse_formula(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(parse_formula(&back.to_string()).unwrap(), back.clone());
        for t in &log(tseed, 3).traces {
            for k in 1..=t.len() {
                prop_assert_eq!(satisfies(&f, t, k).unwrap(), satisfies(&back, t, k).unwrap());
            }
        }
    }

    #[test]
    fn standardizing_apart_is_idempotent_and_keeps_meaning(seed in any::<u64>(), tseed in any::<u64>()) {
        let f = formula(seed);
        let g = standardize_apart(&f);
        prop_assert_eq!(standardize_apart(&g), g.clone());
        let l = log(tseed, 1);
        let t = &l.traces[0];
        for k in 1..=t.len() {
            prop_assert_eq!(satisfies(&f, t, k).unwrap(), satisfies(&g, t, k).unwrap());
        }
    }

    #[test]
    fn rule_application_is_deterministic(seed in any::<u64>(), tseed in any::<u64>()) {
        let rule = parse_rule(&format!("rule {{ {} => \"a\"; default \"b\" }}", formula(seed))).unwrap();
        let l = log(tseed, 3);
        for t in &l.traces {
            for k in 1..=t.len() {
                prop_assert_eq!(apply_rule(&rule, t, k).unwrap(), apply_rule(&rule, t, k).unwrap());
            }
        }
    }

    #[test]
    fn case_order_does_not_matter_for_well_defined_rules(s1 in any::<u64>(), s2 in any::<u64>(), tseed in any::<u64>()) {
        let (f1, f2) = (formula(s1), formula(s2));
        let t = |s: &str| TargetExpr::NonNum(foe_predict::ast::NonNumExpr::Str(s.into()));
        let fwd = AnalyticRule::new(vec![(f1.clone(), t("x")), (f2.clone(), t("y"))], t("z"));
        let rev = AnalyticRule::new(vec![(f2, t("y")), (f1, t("x"))], t("z"));
        let l = log(tseed, 4);
        if check_well_defined(&fwd, &l).unwrap().is_well_defined() {
            for tr in &l.traces {
                for k in 1..=tr.len() {
                    prop_assert_eq!(apply_rule(&fwd, tr, k).unwrap(), apply_rule(&rev, tr, k).unwrap());
                }
            }
        }
    }

    #[test]
    fn xes_round_trip(seed in any::<u64>()) {
        let l = log(seed, 4);
        // Trace ids come back as the trace's concept:name attribute.
        let back = parse_xes(&to_xes_string(&l), Path::new("mem.xes")).unwrap();
        prop_assert_eq!(back.traces.len(), l.traces.len());
        for (b, t) in back.traces.iter().zip(&l.traces) {
            prop_assert_eq!(&b.id, &t.id);
            prop_assert_eq!(&b.events, &t.events);
        }
    }

    #[test]
    fn encoded_rows_have_the_encoder_width(seed in any::<u64>(), n in 1usize..4) {
        let l = log(seed, 6);
        let cfg = EncoderConfig::Composite { members: vec![
            EncoderConfig::LastNOneHot { n: Some(n), attributes: vec!["a".into(), "b".into()] },
            EncoderConfig::LastNNumeric { n: None, attributes: vec!["c".into()] },
        ]};
        let rule = parse_rule("rule { default e[curr].b }").unwrap();
        let (ds, skips, enc) = label_log(&rule, &l, &cfg, LabelOptions::default()).unwrap();
        prop_assert!(ds.rows.iter().all(|r| r.len() == enc.width()));
        prop_assert_eq!(ds.len() + skips.undefined_target, skips.prefixes);
    }

    #[test]
    fn auc_is_symmetric_under_score_negation(
        scores in prop::collection::vec(-5i32..5, 2..40),
        labels in prop::collection::vec(any::<bool>(), 2..40),
    ) {
        let n = scores.len().min(labels.len());
        let s: Vec<f64> = scores[..n].iter().map(|&x| x as f64).collect();
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        match (rank_auc(&s, &labels[..n]), rank_auc(&neg, &labels[..n])) {
            (Some(a), Some(b)) => {
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }
            (None, None) => prop_assert!(labels[..n].iter().all(|&l| l) || labels[..n].iter().all(|&l| !l)),
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..60)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let Metrics::Regression { mae, rmse, .. } = regression_metrics(&p, &t) else { unreachable!() };
        prop_assert!(mae <= rmse * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn saved_models_predict_bit_identically(seed in any::<u64>(), which in 0usize..3) {
        let l = synth::ping_pong_log(40, 0.4, 0.1, seed);
        let rule = foe_predict::corpus::rule("ar01").unwrap().unwrap();
        let (ds, _, _) = label_log(&rule, &l, &EncoderConfig::default(), LabelOptions::default()).unwrap();
        let spec = [ModelSpec::ZeroR, ModelSpec::tree(6), ModelSpec::logistic(seed)][which].clone();
        let model = train(&ds, &spec).unwrap();
        let back = parse_model(&model.to_string()).unwrap();
        prop_assert_eq!(&back, &model);
        for row in &ds.rows {
            let (a, b) = (model.predict(row).unwrap(), back.predict(row).unwrap());
            prop_assert_eq!(a.score().to_bits(), b.score().to_bits());
        }
    }
}
