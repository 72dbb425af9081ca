use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Recorded learning curves, one row per recorded epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorTrace {
    pub epochs: Vec<usize>,
    /// Time in units of τ, i.e. epoch · learning rate.
    pub times: Vec<f64>,
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    /// Strength along each tracked data mode.
    pub modes: Vec<Vec<f64>>,
    pub align_u: Vec<Vec<f64>>,
    pub align_v: Vec<Vec<f64>>,
    pub stopped_early: bool,
}

/// One data mode followed over training.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeAlignment {
    pub mode: usize,
    pub times: Vec<f64>,
    pub strength: Vec<f64>,
    pub align_u: Vec<f64>,
    pub align_v: Vec<f64>,
}

impl ErrorTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn tracked_modes(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    /// Recorded point with the lowest test error as (t/τ, error).
    pub fn min_test(&self) -> Option<(f64, f64)> {
        self.test
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &v)| (self.times[i], v))
    }

    pub fn last_test(&self) -> Option<f64> {
        self.test.last().copied()
    }

    pub fn last_train(&self) -> Option<f64> {
        self.train.last().copied()
    }

    /// Linear interpolation of a recorded series at time `t`; clamps outside
    /// the recorded range.
    pub fn interpolate(&self, series: &[f64], t: f64) -> Option<f64> {
        if self.times.is_empty() {
            return None;
        }
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            return Some(series[0]);
        }
        if i >= self.times.len() {
            return series.last().copied();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        Some(series[i - 1] + w * (series[i] - series[i - 1]))
    }

    pub fn to_csv(&self) -> String {
        let k = self.tracked_modes();
        let mut out = String::from("t_over_tau,eps_train,eps_test");
        for prefix in ["s", "align_u", "align_v"] {
            for a in 1..=k {
                let _ = write!(out, ",{prefix}_{a}");
            }
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{},{},{}", self.times[i], self.train[i], self.test[i]);
            for block in [&self.modes, &self.align_u, &self.align_v] {
                for v in &block[i] {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`ErrorTrace::to_csv`]. Epoch numbers are not
    /// stored and come back as row indices.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::ConfigParse("empty trace".into()))?;
        let cols = header.split(',').count();
        if cols < 3 || (cols - 3) % 3 != 0 {
            return Err(Error::ConfigParse(format!("bad trace header {header:?}")));
        }
        let k = (cols - 3) / 3;
        let mut trace = ErrorTrace::default();
        for (row, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::ConfigParse(format!("trace row {row}: {e}")))?;
            if vals.len() != cols {
                return Err(Error::ConfigParse(format!("trace row {row} has {} fields", vals.len())));
            }
            trace.epochs.push(row);
            trace.times.push(vals[0]);
            trace.train.push(vals[1]);
            trace.test.push(vals[2]);
            trace.modes.push(vals[3..3 + k].to_vec());
            trace.align_u.push(vals[3 + k..3 + 2 * k].to_vec());
            trace.align_v.push(vals[3 + 2 * k..].to_vec());
        }
        Ok(trace)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::harness::write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Per-mode view of a trace.
pub fn alignment_trace(trace: &ErrorTrace) -> Vec<ModeAlignment> {
    (0..trace.tracked_modes())
        .map(|a| ModeAlignment {
            mode: a + 1,
            times: trace.times.clone(),
            strength: trace.modes.iter().map(|r| r[a]).collect(),
            align_u: trace.align_u.iter().map(|r| r[a]).collect(),
            align_v: trace.align_v.iter().map(|r| r[a]).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ErrorTrace {
        ErrorTrace {
            epochs: vec![0, 1, 2],
            times: vec![0.0, 0.5, 1.0],
            train: vec![1.0, 0.5, 0.25],
            test: vec![1.0, 0.4, 0.6],
            modes: vec![vec![0.1, 0.2], vec![1.0, 0.5], vec![2.0, 1.0]],
            align_u: vec![vec![0.3, 0.2], vec![0.9, 0.8], vec![1.0, 1.0]],
            align_v: vec![vec![0.1, 0.4], vec![0.7, 0.6], vec![1.0, 0.9]],
            stopped_early: false,
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let csv = t.to_csv();
        assert!(csv.starts_with("t_over_tau,eps_train,eps_test,s_1,s_2,align_u_1,align_u_2,align_v_1,align_v_2\n"));
        assert_eq!(ErrorTrace::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn minimum_and_interpolation() {
        let t = sample();
        assert_eq!(t.min_test(), Some((0.5, 0.4)));
        assert!((t.interpolate(&t.test, 0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(t.interpolate(&t.test, 5.0), Some(0.6));
        let modes = alignment_trace(&t);
        assert_eq!(modes.len(), 2);
        assert_eq!(modes[1].align_v, vec![0.4, 0.6, 0.9]);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(ErrorTrace::from_csv("t_over_tau,eps_train,eps_test\n0,1\n").is_err());
        assert!(ErrorTrace::from_csv("a,b\n").is_err());
    }
}
