//! One robot threading two static obstacles, for a few prediction windows
//! and an inflated-radius baseline.

use std::path::Path;

use mrsafe::metrics::MetricReport;

fn main() -> mrsafe::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/example1_static.json");
    let cases: [(&str, &[&str]); 4] = [
        ("lambda 0.2", &["gains.lambda=0.2"]),
        ("lambda 0.5", &["gains.lambda=0.5"]),
        ("lambda 1.0", &["gains.lambda=1.0"]),
        (
            "lambda 1.0, rho + 0.35",
            &["gains.lambda=1.0", "safety.inflate_rho=0.35"],
        ),
    ];
    println!(
        "{:<24} {:>10} {:>10} {:>10}",
        "case", "clearance", "speed TV", "goal [s]"
    );
    for (name, overrides) in cases {
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        let spec = mrsafe::load_scenario(&path, &overrides)?;
        let log = mrsafe::run(&spec)?;
        let r = MetricReport::compute(&log, &spec);
        let goal = r.robots[0]
            .goal_reach_time
            .map_or("-".to_string(), |t| format!("{t:.2}"));
        println!(
            "{name:<24} {:>10.4} {:>10.3} {goal:>10}",
            r.min_clearance, r.velocity_total_variation
        );
    }
    Ok(())
}
