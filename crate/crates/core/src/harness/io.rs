//! Plot-ready CSV output for sweeps and distributions.

use std::io::Write;

use super::{DistributionScan, SweepResult};
use crate::trajectory::fmt_float;

pub const SWEEP_HEADER: &str = "variable,value,mean_L,mean_R,min_L,max_L,min_R,max_R,n_ok,n_failed";
pub const DISTRIBUTION_HEADER: &str = "direction_index,L,R";

pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for p in &sweep.per_point {
        let nums: Vec<String> = [p.value, p.mean_l, p.mean_r, p.min_l, p.max_l, p.min_r, p.max_r]
            .into_iter()
            .map(fmt_float)
            .collect();
        writeln!(
            out,
            "{},{},{},{}",
            sweep.variable.as_str(),
            nums.join(","),
            p.n_ok,
            p.n_failed
        )?;
    }
    Ok(())
}

pub fn write_distribution_csv<W: Write>(scan: &DistributionScan, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DISTRIBUTION_HEADER}")?;
    for (i, (l, r)) in scan.lengths.iter().zip(&scan.radii).enumerate() {
        writeln!(out, "{i},{},{}", fmt_float(*l), fmt_float(*r))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn sweep_csv_layout() {
        let a = dmatrix![-1.0, 0.0; 0.0, -2.0];
        let b = DMatrix::identity(2, 2);
        let opts = SweepOptions {
            ensemble: 2,
            tf: 1.0,
            ..Default::default()
        };
        let s = sweep_delta(&a, &b, &DVector::zeros(2), &[0.1, 1.0, 10.0], &opts).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("delta,1.0000000000000001e-1,"));
        assert!(lines[1].ends_with(",2,0"));
    }

    #[test]
    fn distribution_csv_layout() {
        let a = dmatrix![-1.0, 0.4; 0.0, -2.0];
        let b = dmatrix![0.0; 1.0];
        let opts = SweepOptions::default();
        let scan = distribution_scan(&a, &b, &DVector::zeros(2), 1e-3, 5, &opts).unwrap();
        let mut buf = Vec::new();
        write_distribution_csv(&scan, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(5).unwrap().starts_with("4,"));
    }
}
