//! Ten robots crossing a field with one static and two moving obstacles.
//! The two bundled variants differ only in the velocity of the third
//! obstacle; this prints how far apart the resulting paths get.

use std::path::Path;

use mrsafe::metrics::MetricReport;

fn main() -> mrsafe::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut logs = Vec::new();
    for name in ["example3_dynamic_a.json", "example3_dynamic_b.json"] {
        let spec = mrsafe::load_scenario(&dir.join(name), &[])?;
        let log = mrsafe::run(&spec)?;
        let r = MetricReport::compute(&log, &spec);
        println!(
            "{name}: collisions {}, fallback steps {}, goals {}/{}, min clearance {:.3} m",
            r.collisions,
            r.fallback_steps,
            r.goals_reached,
            spec.robots.len(),
            r.min_clearance
        );
        logs.push(log);
    }
    for i in 0..logs[0].robot_count() {
        let (a, b) = (logs[0].trajectory(i), logs[1].trajectory(i));
        let d = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(0.0, f64::max);
        println!("robot {i}: max path difference {d:.3} m");
    }
    Ok(())
}
