use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{fidelity, QubitState};

/// Schema tag written as the first line of every trajectory CSV.
pub const TRAJECTORY_SCHEMA: &str = "# qubit-feedback trajectory v1";
/// Schema tag of the substep-resolution homodyne record.
pub const RECORD_SCHEMA: &str = "# qubit-feedback homodyne-record v1";

/// Checkpoints of one realized trajectory.
///
/// `states`, `times` and `drives` have `N + 1` entries; `drives[i]` is the
/// drive in force when checkpoint `i` is stored (`drives[0]` is the initial
/// drive, zero for piecewise controllers). `dj` holds the `N * N_sub`
/// substep homodyne increments, or is empty for closed-system runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<QubitState>,
    pub drives: Vec<f64>,
    pub dj: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    pub fn n_checkpoints(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn validate(&self, n_sub: Option<usize>) -> Result<()> {
        let n = self.n_checkpoints();
        if self.states.is_empty() || self.times.len() != n + 1 || self.drives.len() != n + 1 {
            return Err(Error::InconsistentTrajectory(format!(
                "{} states, {} times, {} drives",
                self.states.len(),
                self.times.len(),
                self.drives.len()
            )));
        }
        if let Some(ns) = n_sub {
            if !self.dj.is_empty() && self.dj.len() != n * ns {
                return Err(Error::InconsistentTrajectory(format!(
                    "{} homodyne increments for {n} intervals of {ns} substeps",
                    self.dj.len()
                )));
            }
        }
        Ok(())
    }

    pub fn fidelities(&self, target: &QubitState) -> Vec<f64> {
        self.states.iter().map(|s| fidelity(s, target)).collect()
    }

    /// Writes the checkpoint table `t, re_e, im_e, re_g, im_g, fidelity, omega`.
    pub fn write_csv<W: Write>(&self, mut w: W, target: &QubitState) -> Result<()> {
        writeln!(w, "{TRAJECTORY_SCHEMA}")?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "re_e", "im_e", "re_g", "im_g", "fidelity", "omega"])?;
        for ((t, s), om) in self.times.iter().zip(&self.states).zip(&self.drives) {
            wr.serialize((t, s.re_e, s.im_e, s.re_g, s.im_g, fidelity(s, target), om))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes the substep homodyne record `step, t, dJ`.
    pub fn write_record_csv<W: Write>(&self, mut w: W, dt: f64) -> Result<()> {
        writeln!(w, "{RECORD_SCHEMA}")?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["step", "t", "dJ"])?;
        for (k, dj) in self.dj.iter().enumerate() {
            wr.serialize((k, k as f64 * dt, dj))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Rows of a checkpoint CSV as `(t, state, omega)`.
pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<(f64, QubitState, f64)>> {
    let body = read_with_schema(r, TRAJECTORY_SCHEMA)?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let hdr = rd.headers()?.clone();
    let expected = ["t", "re_e", "im_e", "re_g", "im_g", "fidelity", "omega"];
    if hdr.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!("unexpected trajectory columns {hdr:?}")));
    }
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let (t, a, b, c, d, _f, om): (f64, f64, f64, f64, f64, f64, f64) = row?;
        out.push((t, QubitState::new(a, b, c, d), om));
    }
    Ok(out)
}

/// Homodyne increments of a substep record CSV, in order.
pub fn read_record_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let body = read_with_schema(r, RECORD_SCHEMA)?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let hdr = rd.headers()?.clone();
    if hdr.iter().ne(["step", "t", "dJ"].iter().copied()) {
        return Err(Error::Schema(format!("unexpected record columns {hdr:?}")));
    }
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let (_k, _t, dj): (usize, f64, f64) = row?;
        out.push(dj);
    }
    Ok(out)
}

fn read_with_schema<R: Read>(mut r: R, schema: &str) -> Result<String> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    let (first, rest) = s.split_once('\n').unwrap_or((s.as_str(), ""));
    if first.trim_end() != schema {
        return Err(Error::Schema(format!(
            "expected `{schema}`, found `{}`",
            first.trim_end()
        )));
    }
    Ok(rest.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryRecord {
        TrajectoryRecord {
            times: vec![0.0, 0.5, 1.0],
            states: vec![
                QubitState::ground(),
                QubitState::new(0.6, 0.0, 0.0, 0.8),
                QubitState::excited(),
            ],
            drives: vec![0.0, 1.5, -2.0],
            dj: vec![0.1, -0.2, 0.3, 0.05],
            seed: 3,
            stream: 0,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, &QubitState::excited()).unwrap();
        let rows = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].1, tr.states[1]);
        assert_eq!(rows[2].2, -2.0);

        let mut buf = Vec::new();
        tr.write_record_csv(&mut buf, 0.25).unwrap();
        assert_eq!(read_record_csv(buf.as_slice()).unwrap(), tr.dj);
    }

    #[test]
    fn schema_is_checked() {
        let err = read_trajectory_csv("t,a\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn empty_trajectory_has_header_only() {
        let tr = TrajectoryRecord {
            times: vec![],
            states: vec![],
            drives: vec![],
            dj: vec![],
            seed: 0,
            stream: 0,
        };
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, &QubitState::excited()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn length_validation() {
        let mut tr = sample();
        assert!(tr.validate(Some(2)).is_ok());
        assert!(tr.validate(Some(3)).is_err());
        tr.drives.pop();
        assert!(tr.validate(None).is_err());
    }
}
