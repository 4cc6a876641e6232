//! CSV form of a [`SimLog`]: one row per robot per step.
//!
//! Pair records are not stored; [`read_csv`] rebuilds them from the
//! scenario, which also supplies radii and obstacle motion.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::qp::QpStatus;
use crate::sim::{pair_records, RobotRecord, SimLog, StepRecord};
use crate::types::{Pose, RobotState, ScenarioSpec};

pub const HEADER: [&str; 14] = [
    "t",
    "robot",
    "x",
    "y",
    "theta",
    "u1",
    "u2",
    "udot1",
    "udot2",
    "err_norm",
    "h_min",
    "active_count",
    "zeta",
    "g",
];

/// Nine significant digits in the shortest of fixed or exponent notation,
/// like C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn parse_num(field: &str) -> Option<f64> {
    match field {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => field.parse().ok(),
    }
}

pub fn write_csv<W: Write>(log: &SimLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(HEADER).map_err(csv_err)?;
    for s in &log.steps {
        for (i, r) in s.robots.iter().enumerate() {
            let fields = [
                format_g9(s.t),
                i.to_string(),
                format_g9(r.pose.x),
                format_g9(r.pose.y),
                format_g9(r.pose.theta),
                format_g9(r.u[0]),
                format_g9(r.u[1]),
                format_g9(r.udot[0]),
                format_g9(r.udot[1]),
                format_g9(r.err_norm),
                format_g9(r.h_min),
                r.active_count.to_string(),
                format_g9(r.zeta),
                format_g9(r.g),
            ];
            w.write_record(&fields).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(log: &SimLog) -> String {
    let mut buf = Vec::new();
    write_csv(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Parses a log written by [`write_csv`] for the given scenario. Values not
/// in the file (QP status, iterations) read back as optimal with zero
/// iterations.
pub fn read_csv<R: Read>(input: R, spec: &ScenarioSpec) -> Result<SimLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let n = spec.robots.len();
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or(Error::Log {
            line: 1,
            message: "empty log".into(),
        })?
        .map_err(|e| Error::Log {
            line: 1,
            message: e.to_string(),
        })?;
    if header.iter().ne(HEADER) {
        return Err(Error::Log {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut obstacles: Vec<[f64; 2]> = spec.obstacles.iter().map(|o| o.position).collect();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut pending: Vec<RobotRecord> = Vec::with_capacity(n);
    let mut t_pending = 0.0;
    for (idx, rec) in records.enumerate() {
        let line = idx as u64 + 2;
        let bad = |message: String| Error::Log { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, got {}",
                HEADER.len(),
                rec.len()
            )));
        }
        let mut v = [0.0; 14];
        for (k, field) in rec.iter().enumerate() {
            v[k] = parse_num(field)
                .ok_or_else(|| bad(format!("bad {} value `{field}`", HEADER[k])))?;
        }
        let robot = rec[1]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad robot index `{}`", &rec[1])))?;
        if robot != pending.len() || robot >= n {
            return Err(bad(format!(
                "expected robot {} of {n}, got {robot}",
                pending.len()
            )));
        }
        if robot == 0 {
            t_pending = v[0];
        } else if v[0] != t_pending {
            return Err(bad(format!(
                "time {} differs from its step's {t_pending}",
                v[0]
            )));
        }
        let active_count = rec[11]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad active_count `{}`", &rec[11])))?;
        pending.push(RobotRecord {
            pose: Pose {
                x: v[2],
                y: v[3],
                theta: v[4],
            },
            u: [v[5], v[6]],
            udot: [v[7], v[8]],
            err_norm: v[9],
            xi_norm: f64::NAN,
            h_min: v[10],
            active_count,
            zeta: v[12],
            g: v[13],
        });
        if pending.len() == n {
            if !steps.is_empty() {
                for (p, o) in obstacles.iter_mut().zip(&spec.obstacles) {
                    *p = [
                        p[0] + o.velocity[0] * spec.dt,
                        p[1] + o.velocity[1] * spec.dt,
                    ];
                }
            }
            let states: Vec<RobotState> = pending
                .iter()
                .map(|r| RobotState {
                    pose: r.pose,
                    u: r.u,
                })
                .collect();
            steps.push(StepRecord {
                t: t_pending,
                pairs: pair_records(spec, &states, &obstacles),
                robots: std::mem::take(&mut pending),
                obstacles: obstacles.clone(),
                status: QpStatus::Optimal,
                iterations: 0,
                fallback: false,
            });
        }
    }
    if !pending.is_empty() {
        return Err(Error::Log {
            line: (steps.len() * n + pending.len() + 1) as u64,
            message: format!("last step has {} of {n} robots", pending.len()),
        });
    }
    if steps.is_empty() {
        return Err(Error::Log {
            line: 2,
            message: "log has no rows".into(),
        });
    }
    Ok(SimLog { dt: spec.dt, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.1, "0.1"),
            (-2.5, "-2.5"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (1e-5, "1e-05"),
            (1.5e-5, "1.5e-05"),
            (0.0001, "0.0001"),
            (std::f64::consts::PI, "3.14159265"),
            (9.9999999999, "10"),
            (f64::INFINITY, "inf"),
        ];
        for (x, s) in cases {
            assert_eq!(format_g9(x), s, "{x}");
        }
    }

    #[test]
    fn round_trip_preserves_nine_digits() {
        let spec = ScenarioSpec::circle(3, 2.0, 6.0, 0.05);
        let log = run(&spec).unwrap();
        let text = to_csv_string(&log);
        assert!(text.starts_with(
            "t,robot,x,y,theta,u1,u2,udot1,udot2,err_norm,h_min,active_count,zeta,g\n"
        ));
        let back = read_csv(text.as_bytes(), &spec).unwrap();
        assert_eq!(back.steps.len(), log.steps.len());
        for (a, b) in log.steps.iter().zip(&back.steps) {
            for (ra, rb) in a.robots.iter().zip(&b.robots) {
                assert!((ra.pose.x - rb.pose.x).abs() <= 1e-8 * ra.pose.x.abs().max(1e-300));
                assert_eq!(ra.active_count, rb.active_count);
            }
            assert_eq!(a.pairs.len(), b.pairs.len());
        }
        assert_eq!(to_csv_string(&back), text);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let spec = ScenarioSpec::circle(2, 2.0, 6.0, 0.0);
        let log = run(&spec).unwrap();
        let text = to_csv_string(&log).replace(",0,0,", ",zero,0,");
        let err = read_csv(text.as_bytes(), &spec).unwrap_err();
        assert!(matches!(err, Error::Log { line: 2, .. }), "{err}");

        let err = read_csv("a,b\n".as_bytes(), &spec).unwrap_err();
        assert!(matches!(err, Error::Log { line: 1, .. }), "{err}");

        let one_row: String = to_csv_string(&log)
            .lines()
            .take(2)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(read_csv(one_row.as_bytes(), &spec).is_err());
    }
}
