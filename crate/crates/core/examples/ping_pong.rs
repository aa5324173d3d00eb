// Holdout evaluation of ping-pong classification against the ZeroR baseline.

use std::error::Error;

use foe_predict::corpus;
use foe_predict::encoding::EncoderConfig;
use foe_predict::labeling::LabelOptions;
use foe_predict::ml::{HoldoutData, Metrics, ModelSpec};
use foe_predict::synth;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let log = synth::ping_pong_log(300, 0.3, 0.05, 11);
    let rule = corpus::rule("ar01").unwrap()?;
    let config = EncoderConfig::one_hot(&["concept:name", "org:group"]);
    let data = HoldoutData::prepare(&rule, &log, &config, 2.0 / 3.0, LabelOptions::default())?;
    println!(
        "train: {} traces / {} rows, test: {} traces / {} rows",
        data.train_traces,
        data.train.len(),
        data.test_traces,
        data.test.len()
    );

    println!(
        "{:<22} {:>6} {:>8} {:>7} {:>7} {:>9}",
        "Model", "AUC", "Accuracy", "W.Prec", "W.Rec", "F-Measure"
    );
    for spec in [ModelSpec::ZeroR, ModelSpec::tree(8), ModelSpec::logistic(1)] {
        let (metrics, _) = data.evaluate(&spec)?;
        if let Metrics::Classification {
            auc,
            accuracy,
            weighted_precision,
            weighted_recall,
            f_measure,
            ..
        } = metrics
        {
            println!(
                "{:<22} {auc:>6.3} {accuracy:>8.3} {weighted_precision:>7.3} {weighted_recall:>7.3} {f_measure:>9.3}",
                spec.name()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
