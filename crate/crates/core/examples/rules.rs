// Parse an analytic rule, print it back and run the static checks.

use std::error::Error;

use foe_predict::ast::validate;
use foe_predict::corpus;
use foe_predict::parser::parse_rule;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let rule = parse_rule(
        r#"rule {
            exists i . (i > curr and i + 1 <= last
                and e[i].org:resource != e[i+1].org:resource
                and e[i].org:group == e[i+1].org:group) => "Ping-Pong";
            default "Not Ping-Pong"
        }"#,
    )?;
    println!("{rule}");
    println!("kind: {:?}, valid: {}", rule.kind, validate(&rule).is_valid());

    // Mixing label and number targets parses, but fails validation.
    let mixed = parse_rule(r#"rule { curr < last => "late"; default 0 }"#)?;
    for v in validate(&mixed).violations {
        println!("violation: {v}");
    }

    // Syntax errors carry a line and column.
    match parse_rule("rule { curr < => 1; default 0 }") {
        Err(e) => println!("parse error: {e}"),
        Ok(_) => unreachable!(),
    }

    let n = corpus::all().count();
    let ok = corpus::all()
        .filter(|(name, _)| matches!(corpus::rule(name), Some(Ok(r)) if validate(&r).is_valid()))
        .count();
    println!("bundled rules: {ok}/{n} parse and validate");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
