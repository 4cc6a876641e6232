//! Perception noise: each controller sees the others through a bounded
//! position error. Runs several seeds with and without compensating the
//! safety radius.

use std::path::Path;

use mrsafe::metrics::MetricReport;

fn main() -> mrsafe::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/example1_static.json");
    for compensate in [false, true] {
        for seed in 0..5 {
            let overrides = vec![
                "noise.enabled=true".to_string(),
                "noise.r_m=0.15".to_string(),
                format!("safety.compensate_noise={compensate}"),
                format!("sim.seed={seed}"),
            ];
            let spec = mrsafe::load_scenario(&path, &overrides)?;
            let log = mrsafe::run(&spec)?;
            let r = MetricReport::compute(&log, &spec);
            println!(
                "compensate {compensate:<5} seed {seed}: collisions {}, min clearance {:.4} m",
                r.collisions, r.min_clearance
            );
        }
    }
    Ok(())
}
