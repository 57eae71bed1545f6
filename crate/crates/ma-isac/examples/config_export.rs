//! Loading a configuration, listing the defaults it relied on, and writing
//! a result bundle with CSV, JSON metadata and two-column plot data.

use ma_isac::config::RunConfigFile;
use ma_isac::orchestrator::{run_tracking, LayoutPolicy};
use ma_isac::output::{output_dir, records_csv, two_column, write_bundle};

fn main() -> ma_isac::Result<()> {
    let text = r#"{ "array": { "num_tx": 4, "num_rx": 4 }, "system": { "num_subcarriers": 8 }, "motion": { "horizon_slots": 4 } }"#;
    let file = RunConfigFile::from_json(text)?;
    println!("config hash {}", file.hash());
    for e in file.provenance(text) {
        println!("default {} = {}", e.field, e.value);
    }

    let scenario = file.scenario()?;
    let records = run_tracking(&scenario, LayoutPolicy::Fixed)?;
    let csv = records_csv(&records, scenario.vehicles.len());
    print!("{csv}");

    if let Some(dir) = output_dir(None) {
        let slots: Vec<f64> = records.iter().map(|r| r.slot as f64).collect();
        let rates: Vec<f64> = records.iter().map(|r| r.sum_rate).collect();
        write_bundle(&dir, &[("records.csv".into(), csv), ("sum_rate.dat".into(), two_column(&slots, &rates))])?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
