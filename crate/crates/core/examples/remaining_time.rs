// Remaining-time regression: ZeroR, linear regression and a regression tree.

use std::error::Error;

use foe_predict::corpus;
use foe_predict::encoding::EncoderConfig;
use foe_predict::labeling::LabelOptions;
use foe_predict::ml::{HoldoutData, ModelSpec};
use foe_predict::synth;

const HOUR: f64 = 3_600_000.0;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let log = synth::remaining_time_log(200, 5);
    let rule = corpus::rule("ar02").unwrap()?;
    let config = EncoderConfig::Composite {
        members: vec![
            EncoderConfig::one_hot(&["concept:name"]),
            EncoderConfig::TimeDeltas { n: None },
        ],
    };
    let data = HoldoutData::prepare(&rule, &log, &config, 2.0 / 3.0, LabelOptions::default())?;
    println!("{} training rows, {} test rows", data.train.len(), data.test.len());

    println!("{:<22} {:>10} {:>11}", "Model", "MAE (h)", "RMSE (h)");
    for spec in [ModelSpec::ZeroR, ModelSpec::linear(), ModelSpec::tree(6)] {
        let (m, _) = data.evaluate(&spec)?;
        println!(
            "{:<22} {:>10.3} {:>11.3}",
            spec.name(),
            m.mae().unwrap() / HOUR,
            m.rmse().unwrap() / HOUR
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
