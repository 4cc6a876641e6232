//! Ten robots on a circle swap to their antipodal points.
//!
//! cargo run --release --example circle_swap [scenario.json]

use std::path::PathBuf;

use mrsafe::metrics::MetricReport;

fn main() -> mrsafe::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/circle10.json")
        });
    let spec = mrsafe::load_scenario(&path, &[])?;
    let log = mrsafe::run(&spec)?;
    println!("{}", MetricReport::compute(&log, &spec));
    println!("collision events: {}", mrsafe::audit_collisions(&log).len());
    Ok(())
}
