//! Writes a run as CSV and SVG, reads the CSV back and recomputes metrics.

use std::path::Path;

use mrsafe::csvlog::{read_csv, to_csv_string};
use mrsafe::metrics::MetricReport;
use mrsafe::plot::{render, PlotKind};

fn main() -> mrsafe::Result<()> {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/swap2_deadlock.json");
    let spec = mrsafe::load_scenario(&scenario, &["sim.dt=0.005".to_string()])?;
    let log = mrsafe::run(&spec)?;
    let out = std::env::temp_dir().join("mrsafe-log-and-plot");
    std::fs::create_dir_all(&out)?;

    let csv = to_csv_string(&log);
    std::fs::write(out.join("log.csv"), &csv)?;
    let back = read_csv(csv.as_bytes(), &spec)?;
    for kind in [PlotKind::Traj, PlotKind::Speed] {
        let name = format!("{kind:?}.svg").to_lowercase();
        std::fs::write(out.join(&name), render(kind, &back, &spec))?;
    }
    println!("{}", MetricReport::compute(&back, &spec));
    println!("wrote {}", out.display());
    Ok(())
}
