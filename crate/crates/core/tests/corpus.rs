use foe_predict::ast::{validate, RuleKind};
use foe_predict::corpus;
use foe_predict::eval::apply_rule;
use foe_predict::event_log::AttributeValue;
use foe_predict::parser::parse_rule;
use foe_predict::synth::showcase_trace;

#[test]
fn every_bundled_rule_parses_validates_and_evaluates() {
    let trace = showcase_trace();
    assert_eq!(corpus::SHOWCASE.len(), 31);
    assert_eq!(corpus::EXPERIMENTS.len(), 9);
    for (name, src) in corpus::all() {
        let rule = parse_rule(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let report = validate(&rule);
        assert!(report.is_valid(), "{name}: {report}");
        for k in 1..=trace.len() {
            apply_rule(&rule, &trace, k).unwrap_or_else(|e| panic!("{name} k={k}: {e}"));
        }
    }
}

#[test]
fn printed_rules_parse_back_to_the_same_ast() {
    for (name, src) in corpus::all() {
        let rule = parse_rule(src).unwrap();
        let again = parse_rule(&rule.to_string()).unwrap_or_else(|e| panic!("{name}: {e}\n{rule}"));
        assert_eq!(again, rule, "{name}");
    }
}

#[test]
fn rule_kinds_follow_their_targets() {
    let numeric = [
        "ar02", "ar10", "ar11", "ar12", "ar13", "ar14", "ar16", "ar17", "ar19", "ar20", "ar21", "ar22", "ar23",
    ];
    for (name, src) in corpus::SHOWCASE {
        let want = if numeric.contains(name) {
            RuleKind::Numeric
        } else {
            RuleKind::NonNumeric
        };
        assert_eq!(parse_rule(src).unwrap().kind, want, "{name}");
    }
}

// Hand-computed on the showcase trace: events 1..10 with gaps of 25, 50, ..., 225 minutes.
#[test]
fn selected_values_on_the_showcase_trace() {
    let t = showcase_trace();
    let at = |name: &str, k: usize| apply_rule(&corpus::rule(name).unwrap().unwrap(), &t, k).unwrap();
    let min = 60_000.0;
    // remaining time from event 3: gaps 3..9 = 25*(3+4+...+9) minutes
    assert_eq!(at("ar02", 3), AttributeValue::Number(25.0 * 42.0 * min));
    assert_eq!(at("ar13", 3), AttributeValue::Number(8.0));
    // resources r1..r5
    assert_eq!(at("ar16", 2), AttributeValue::Number(5.0));
    // costs 10..100
    assert_eq!(at("ar19", 2), AttributeValue::Number(550.0));
    assert_eq!(at("ar20", 2), AttributeValue::Number(100.0));
    assert_eq!(at("ar22", 2), AttributeValue::Number(40.0));
    assert_eq!(at("ar24", 2), AttributeValue::Text("normal".into()));
    assert_eq!(at("ar29", 4), AttributeValue::Text("assembling".into()));
    assert_eq!(
        at("ar31", 7),
        AttributeValue::Text("OrderDeliveredA_DECLINEDQueued".into())
    );
    assert_eq!(at("ar31", 8), AttributeValue::Text("A_DECLINEDQueued".into()));
    assert_eq!(at("declined", 8), AttributeValue::Text("Declined".into()));
    assert_eq!(at("declined", 9), AttributeValue::Text("Not_Declined".into()));
    assert_eq!(at("ar29", 10), AttributeValue::Text(String::new()));
}
