//! CSV formats. Floats are written with 17 significant digits so that every
//! value round-trips exactly.

use std::io::{Read, Write};

use crate::discrete::IterateHistory;
use crate::dynamics::Trajectory;
use crate::lyapunov::EnergyTrace;
use crate::{Error, Result, Vector};

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// Header `t,x_0..,v_0..,a_0..`.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let n = traj.dim();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(indexed("x", n))
        .chain(indexed("v", n))
        .chain(indexed("a", n))
        .collect();
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(1 + 3 * n);
    for i in 0..traj.len() {
        row.clear();
        row.push(fmt_f64(traj.times[i]));
        for vec in [&traj.xs[i], &traj.vs[i], &traj.accs[i]] {
            row.extend(vec.iter().map(|&x| fmt_f64(x)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_trajectory`]; the result carries no params.
pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols = header.len();
    if cols < 4 || (cols - 1) % 3 != 0 || &header[0] != "t" {
        return Err(Error::Format(format!(
            "expected header t,x_0..,v_0..,a_0.., got {} columns",
            cols
        )));
    }
    let n = (cols - 1) / 3;
    for (k, prefix) in ["x", "v", "a"].iter().enumerate() {
        for (i, name) in indexed(prefix, n).enumerate() {
            if header[1 + k * n + i] != name {
                return Err(Error::Format(format!(
                    "column {} should be {name}, got {}",
                    1 + k * n + i,
                    &header[1 + k * n + i]
                )));
            }
        }
    }
    let (mut times, mut xs, mut vs, mut accs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))?;
        times.push(vals[0]);
        xs.push(Vector::from_column_slice(&vals[1..1 + n]));
        vs.push(Vector::from_column_slice(&vals[1 + n..1 + 2 * n]));
        accs.push(Vector::from_column_slice(&vals[1 + 2 * n..1 + 3 * n]));
    }
    Trajectory::from_samples(times, xs, vs, accs)
}

/// Header `t,energy,fg_shifted,h_value,w_bound,residual,dissipation`.
pub fn write_energy<W: Write>(trace: &EnergyTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "energy",
        "fg_shifted",
        "h_value",
        "w_bound",
        "residual",
        "dissipation",
    ])?;
    for i in 0..trace.len() {
        w.write_record(
            [
                trace.times[i],
                trace.energy[i],
                trace.fg_shifted[i],
                trace.h_value[i],
                trace.w_bound[i],
                trace.residual[i],
                trace.dissipation[i],
            ]
            .map(fmt_f64),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Header `k,x_0..,residual,objective`, one row per iterate starting at `x_0`.
pub fn write_history<W: Write>(hist: &IterateHistory, out: W) -> Result<()> {
    let n = hist.xs.first().map_or(0, |x| x.len());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("k".to_string())
        .chain(indexed("x", n))
        .chain(["residual".to_string(), "objective".to_string()])
        .collect();
    w.write_record(&header)?;
    for (k, x) in hist.xs.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().map(|&xi| fmt_f64(xi)));
        row.push(fmt_f64(hist.residuals[k]));
        row.push(fmt_f64(hist.objective_values[k]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::params::derive_params;
    use crate::problems::Objective;
    use nalgebra::dvector;

    #[test]
    fn seventeen_digits() {
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_f64(x), "3.0000000000000004e-1");
    }

    #[test]
    fn trajectory_round_trip() {
        let obj = Objective::cos_quad(2, 0.1).unwrap();
        let p = derive_params(1.0, 0.005, 3.0).unwrap();
        let traj = integrate(&obj, &p, &dvector![3.0, -1.0], &dvector![0.0, 0.5], 1.0, 1e-2, 5).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_0,x_1,v_0,v_1,a_0,a_1\n"));
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.xs, traj.xs);
        assert_eq!(back.vs, traj.vs);
        assert_eq!(back.accs, traj.accs);
    }

    #[test]
    fn bad_header() {
        let err = read_trajectory("t,x_0,v_1,a_0\n0,0,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
