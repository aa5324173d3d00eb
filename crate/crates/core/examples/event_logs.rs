// Write a log as XES, read it back, and load the same events from a CSV table.

use std::error::Error;
use std::fs;

use foe_predict::event_log::{load_csv, load_xes, write_xes, CsvMapping};
use foe_predict::synth;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = std::env::temp_dir().join(format!("foe-predict-logs-{}", std::process::id()));
    fs::create_dir_all(&dir)?;

    let log = synth::remaining_time_log(5, 1);
    let xes = dir.join("orders.xes");
    write_xes(&log, &xes)?;
    let back = load_xes(&xes)?;
    println!("xes: {} traces, {} events", back.traces.len(), back.num_events());
    assert_eq!(back.traces[0].events, log.traces[0].events);

    // Rows may arrive out of order; they are grouped by case and sorted by time.
    let csv = dir.join("orders.csv");
    fs::write(
        &csv,
        "case,concept:name,org:resource,time:timestamp,cost\n\
         c2,Open,ann,2024-03-01T09:00:00Z,10\n\
         c1,Ship,bob,2024-03-02T12:30:00Z,\n\
         c1,Open,ann,2024-03-01T08:00:00Z,5\n",
    )?;
    let table = load_csv(&csv, &CsvMapping::default())?;
    for t in &table.traces {
        let acts: Vec<String> = t.events.iter().map(|e| e.get("concept:name").render()).collect();
        println!("case {}: {}", t.id, acts.join(" -> "));
    }
    // The empty cost cell is a missing attribute, not zero.
    println!(
        "c1 second cost: {}",
        table.trace("c1").unwrap().attribute(2, "cost").render()
    );

    fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
