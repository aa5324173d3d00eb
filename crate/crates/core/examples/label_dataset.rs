// Turn a log into a labeled prefix dataset and export it as CSV.

use std::error::Error;

use foe_predict::corpus;
use foe_predict::encoding::EncoderConfig;
use foe_predict::labeling::{export_csv, label_log, LabelOptions};
use foe_predict::synth;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let log = synth::ping_pong_log(30, 0.4, 0.1, 7);
    let rule = corpus::rule("ar01").unwrap()?;

    // Last-n one-hot over activities and groups, plus the elapsed time between events.
    let config = EncoderConfig::Composite {
        members: vec![
            EncoderConfig::one_hot(&["concept:name", "org:group"]),
            EncoderConfig::TimeDeltas { n: Some(3) },
        ],
    };
    let (ds, skips, encoder) = label_log(&rule, &log, &config, LabelOptions::default())?;
    println!("{} rows x {} features ({skips})", ds.len(), encoder.width());
    println!("first features: {:?}", &ds.feature_names[..4]);

    let mut counts = std::collections::BTreeMap::new();
    for l in ds.labels() {
        *counts.entry(l).or_insert(0) += 1;
    }
    println!("labels: {counts:?}");
    let (id, k) = &ds.provenance[0];
    println!("row 0 is trace {id} cut at k={k} -> {}", ds.targets[0].render());

    let out = std::env::temp_dir().join(format!("foe-predict-ping-pong-{}.csv", std::process::id()));
    export_csv(&ds, &out)?;
    println!("wrote {}", out.display());
    std::fs::remove_file(out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
