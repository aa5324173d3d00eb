//! The bundled rule library: 31 showcase rules (`ar01` to `ar31`) and the nine rules
//! used in the experiments on the BPIC 2012, 2013 and 2015 logs.

use crate::ast::AnalyticRule;
use crate::parser::{parse_rule, ParseError};

pub const SHOWCASE: &[(&str, &str)] = &[
    ("ar01", include_str!("../rules/ar01.foe")),
    ("ar02", include_str!("../rules/ar02.foe")),
    ("ar03", include_str!("../rules/ar03.foe")),
    ("ar04", include_str!("../rules/ar04.foe")),
    ("ar05", include_str!("../rules/ar05.foe")),
    ("ar06", include_str!("../rules/ar06.foe")),
    ("ar07", include_str!("../rules/ar07.foe")),
    ("ar08", include_str!("../rules/ar08.foe")),
    ("ar09", include_str!("../rules/ar09.foe")),
    ("ar10", include_str!("../rules/ar10.foe")),
    ("ar11", include_str!("../rules/ar11.foe")),
    ("ar12", include_str!("../rules/ar12.foe")),
    ("ar13", include_str!("../rules/ar13.foe")),
    ("ar14", include_str!("../rules/ar14.foe")),
    ("ar15", include_str!("../rules/ar15.foe")),
    ("ar16", include_str!("../rules/ar16.foe")),
    ("ar17", include_str!("../rules/ar17.foe")),
    ("ar18", include_str!("../rules/ar18.foe")),
    ("ar19", include_str!("../rules/ar19.foe")),
    ("ar20", include_str!("../rules/ar20.foe")),
    ("ar21", include_str!("../rules/ar21.foe")),
    ("ar22", include_str!("../rules/ar22.foe")),
    ("ar23", include_str!("../rules/ar23.foe")),
    ("ar24", include_str!("../rules/ar24.foe")),
    ("ar25", include_str!("../rules/ar25.foe")),
    ("ar26", include_str!("../rules/ar26.foe")),
    ("ar27", include_str!("../rules/ar27.foe")),
    ("ar28", include_str!("../rules/ar28.foe")),
    ("ar29", include_str!("../rules/ar29.foe")),
    ("ar30", include_str!("../rules/ar30.foe")),
    ("ar31", include_str!("../rules/ar31.foe")),
];

pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("e1_group_change", include_str!("../rules/e1_group_change.foe")),
    ("e2_transfer_back", include_str!("../rules/e2_transfer_back.foe")),
    ("e3_three_groups", include_str!("../rules/e3_three_groups.foe")),
    ("rem_waiting", include_str!("../rules/rem_waiting.foe")),
    ("rem_wait_exact", include_str!("../rules/rem_wait_exact.foe")),
    ("rem_filling_info", include_str!("../rules/rem_filling_info.foe")),
    ("declined", include_str!("../rules/declined.foe")),
    ("complex_application", include_str!("../rules/complex_application.foe")),
    (
        "remaining_activities",
        include_str!("../rules/remaining_activities.foe"),
    ),
];

/// Every bundled rule, showcase first.
pub fn all() -> impl Iterator<Item = (&'static str, &'static str)> {
    SHOWCASE.iter().chain(EXPERIMENTS).copied()
}

/// Source text of a bundled rule by name.
pub fn source(name: &str) -> Option<&'static str> {
    all().find(|(n, _)| *n == name).map(|(_, s)| s)
}

pub fn rule(name: &str) -> Option<Result<AnalyticRule, ParseError>> {
    source(name).map(parse_rule)
}
