//! Parameter sweep through the CLI layer: one run per value, written to a
//! directory of its own, plus a summary table.

use std::path::Path;

fn main() -> mrsafe::Result<()> {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/swap2_deadlock.json");
    let out = std::env::temp_dir().join("mrsafe-lambda-sweep");
    let values: Vec<String> = ["0.2", "0.5", "1.0"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = mrsafe::cli::cmd_sweep(&scenario, "gains.lambda", &values, &out, &[])?;
    for row in rows {
        match row.report {
            Some(r) => println!(
                "lambda {}: clearance {:.3} m, goals {}, collisions {}",
                row.value, r.min_clearance, r.goals_reached, r.collisions
            ),
            None => println!("lambda {}: {}", row.value, row.status),
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}
