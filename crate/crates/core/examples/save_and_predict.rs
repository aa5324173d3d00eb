// Train a model, save it, load it back and predict for a running case.

use std::error::Error;

use foe_predict::cli::predict_prefix;
use foe_predict::corpus;
use foe_predict::encoding::EncoderConfig;
use foe_predict::labeling::{label_log, LabelOptions};
use foe_predict::ml::{load_model, save_model, train, ModelSpec};
use foe_predict::synth;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let log = synth::ping_pong_log(150, 0.5, 0.0, 3);
    let rule = corpus::rule("ar01").unwrap()?;
    let (ds, _, encoder) = label_log(&rule, &log, &EncoderConfig::default(), LabelOptions::default())?;
    let model = train(&ds, &ModelSpec::tree(6))?;

    let path = std::env::temp_dir().join(format!("foe-predict-{}.model", std::process::id()));
    save_model(&model, &path)?;
    let loaded = load_model(&path)?;
    std::fs::remove_file(&path)?;
    println!("{}", loaded.to_string().lines().next().unwrap_or_default());
    assert_eq!(loaded, model);

    // The encoder fitted at training time fixes the feature layout for new prefixes.
    for t in log.traces.iter().take(5) {
        let p = predict_prefix(&loaded, &encoder, &log, &t.id, 2)?;
        println!("{} at k=2: {} ({:.2})", t.id, p.value().render(), p.score());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
