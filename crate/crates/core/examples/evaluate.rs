// Apply rules to every prefix of a trace, including the ⊥ cases.

use std::error::Error;

use foe_predict::corpus;
use foe_predict::eval::{apply_rule, check_well_defined, satisfies};
use foe_predict::event_log::EventLog;
use foe_predict::parser::{parse_formula, parse_rule};
use foe_predict::synth;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let trace = synth::showcase_trace();
    println!("trace {} has {} events", trace.id, trace.len());

    // ar02: remaining time in milliseconds. ar29: next activity, "" at the last event.
    for name in ["ar02", "ar29"] {
        let rule = corpus::rule(name).unwrap()?;
        let values: Vec<String> = (1..=trace.len())
            .map(|k| apply_rule(&rule, &trace, k).map(|v| v.render()))
            .collect::<Result<_, _>>()?;
        println!("{name}: {}", values.join(" | "));
    }

    // A missing attribute makes every comparison false, `!=` included.
    let f = parse_formula("e[curr].noSuchAttribute != 3")?;
    println!("undefined != 3 at k=1: {}", satisfies(&f, &trace, 1)?);

    // Aggregates with no valid position are ⊥, counts are 0.
    let rule = parse_rule("rule { default sum(e[x].cost ; where x = curr+1:curr) }")?;
    println!("empty sum: {}", apply_rule(&rule, &trace, 3)?.render());

    // Two cases that can fire together with different values are reported per prefix.
    let clash = parse_rule("rule { e[curr].cost > 50 => 1; e[curr].cost > 80 => 2; default 0 }")?;
    let report = check_well_defined(&clash, &EventLog::new(vec![trace]))?;
    for c in &report.violations {
        println!("conflict: {c}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
