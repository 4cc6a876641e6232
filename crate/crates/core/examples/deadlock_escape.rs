//! Two robots driving head-on at each other, with and without the
//! rotational escape term.

use std::path::Path;

use mrsafe::metrics::MetricReport;

fn main() -> mrsafe::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/swap2_deadlock.json");
    for zeta in ["0", "2"] {
        let spec = mrsafe::load_scenario(&path, &[format!("gains.zeta={zeta}")])?;
        let log = mrsafe::run(&spec)?;
        let report = MetricReport::compute(&log, &spec);
        let last = log.steps.last().unwrap();
        let gap = {
            let (a, b) = (last.robots[0].pose, last.robots[1].pose);
            (a.x - b.x).hypot(a.y - b.y)
        };
        println!(
            "zeta = {zeta}: goals {}/2, min speed {:.3} m/s, final separation {gap:.2} m",
            report.goals_reached, report.min_speed_after_start
        );
        for r in &report.robots {
            println!(
                "  robot {}: rmse {:.4}, mae {:.4}, intervention {:.3} s",
                r.robot, r.rmse, r.mae, r.intervention_time
            );
        }
    }
    Ok(())
}
