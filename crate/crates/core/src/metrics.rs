use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::ComplexVector;

/// Floor applied to NMSD so exact recovery stays finite.
pub const NMSD_FLOOR_DB: f64 = -300.0;

/// `20 log10(||x* - x_hat|| / ||x*||)` in dB, floored at [`NMSD_FLOOR_DB`].
pub fn nmsd(x_true: &ComplexVector, x_hat: &ComplexVector) -> Result<f64> {
    check_dim("nmsd", x_true.len(), x_hat.len())?;
    let reference = x_true.norm2();
    if reference == 0.0 {
        return Err(Error::InvalidParameter(
            "NMSD is undefined for an all-zero reference".into(),
        ));
    }
    let err = x_true.sub(x_hat)?.norm2();
    Ok((20.0 * (err / reference).log10()).max(NMSD_FLOOR_DB))
}

/// One estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub noise_condition: String,
    pub solver_name: String,
    pub seed: u64,
    pub nmsd_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
}

/// Means over all trials of one (noise condition, solver) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub noise_condition: String,
    pub solver: String,
    pub n_trials: usize,
    pub mean_nmsd_db: f64,
    pub mean_iterations: f64,
    pub mean_runtime_s: f64,
    pub converged_fraction: f64,
}

/// Groups records by (condition, solver) in order of first appearance and
/// averages each group.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Empty("trial records"));
    }
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in records {
        let key = (r.noise_condition.as_str(), r.solver_name.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    Ok(keys
        .into_iter()
        .map(|(cond, solver)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.noise_condition == cond && r.solver_name == solver)
                .collect();
            let n = group.len() as f64;
            let mean = |f: fn(&TrialRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryRow {
                noise_condition: cond.to_string(),
                solver: solver.to_string(),
                n_trials: group.len(),
                mean_nmsd_db: mean(|r| r.nmsd_db),
                mean_iterations: mean(|r| r.iterations as f64),
                mean_runtime_s: mean(|r| r.runtime_s),
                converged_fraction: mean(|r| if r.converged { 1.0 } else { 0.0 }),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn rec(trial: usize, cond: &str, solver: &str, nmsd: f64, iters: usize, rt: f64) -> TrialRecord {
        TrialRecord {
            trial,
            noise_condition: cond.into(),
            solver_name: solver.into(),
            seed: 0,
            nmsd_db: nmsd,
            iterations: iters,
            converged: true,
            runtime_s: rt,
        }
    }

    #[test]
    fn nmsd_examples() {
        let x = ComplexVector::new(vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)]).unwrap();
        assert_eq!(nmsd(&x, &x).unwrap(), NMSD_FLOOR_DB);
        assert!(nmsd(&x, &ComplexVector::zeros(2)).unwrap().abs() < 1e-12);

        let e = ComplexVector::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
        let scaled = e.scale_real(0.1 * x.norm2() / e.norm2());
        let got = nmsd(&x, &x.add(&scaled).unwrap()).unwrap();
        assert!((got + 20.0).abs() < 1e-12, "{got}");

        assert!(nmsd(&ComplexVector::zeros(2), &x).is_err());
        assert!(nmsd(&x, &ComplexVector::zeros(3)).is_err());
    }

    proptest! {
        #[test]
        fn nmsd_scale_invariant(
            vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..10),
            cr in -3.0f64..3.0, ci in -3.0f64..3.0,
        ) {
            let c = Complex64::new(cr, ci);
            prop_assume!(c.norm() > 1e-3);
            let x: ComplexVector = vals.iter().map(|v| Complex64::new(v.0, v.1)).collect();
            let xh: ComplexVector = vals.iter().map(|v| Complex64::new(v.2, v.3)).collect();
            prop_assume!(x.norm2() > 1e-6);
            let a = nmsd(&x, &xh).unwrap();
            let b = nmsd(&x.scale(c), &xh.scale(c)).unwrap();
            if a > NMSD_FLOOR_DB {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }
            let err = x.sub(&xh).unwrap().norm2();
            prop_assert_eq!(a <= 0.0, err <= x.norm2());
        }
    }

    #[test]
    fn aggregate_single_and_pair() {
        let one = vec![rec(0, "awgn", "admm", -15.0, 30, 0.05)];
        let s = aggregate(&one).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean_nmsd_db, -15.0);
        assert_eq!(s[0].mean_iterations, 30.0);

        let two = vec![
            rec(0, "awgn", "admm", -15.0, 30, 0.05),
            rec(1, "awgn", "admm", -17.0, 40, 0.07),
        ];
        let s = aggregate(&two).unwrap();
        assert_eq!(s[0].mean_nmsd_db, -16.0);
        assert_eq!(s[0].mean_iterations, 35.0);
        assert!((s[0].mean_runtime_s - 0.06).abs() < 1e-15);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_six_record_fixture() {
        let records = vec![
            rec(0, "awgn", "admm", -16.0, 33, 0.050),
            rec(0, "awgn", "omp", -14.0, 15, 0.020),
            rec(0, "inr40", "admm", -15.5, 35, 0.052),
            rec(1, "awgn", "admm", -17.0, 36, 0.054),
            rec(1, "awgn", "omp", -15.5, 15, 0.024),
            rec(1, "inr40", "admm", -16.5, 31, 0.048),
        ];
        let s = aggregate(&records).unwrap();
        let keys: Vec<(&str, &str)> = s.iter().map(|r| (r.noise_condition.as_str(), r.solver.as_str())).collect();
        assert_eq!(keys, vec![("awgn", "admm"), ("awgn", "omp"), ("inr40", "admm")]);
        // hand-computed means
        assert!((s[0].mean_nmsd_db + 16.5).abs() < 1e-12);
        assert!((s[0].mean_iterations - 34.5).abs() < 1e-12);
        assert!((s[0].mean_runtime_s - 0.052).abs() < 1e-12);
        assert!((s[1].mean_nmsd_db + 14.75).abs() < 1e-12);
        assert!((s[1].mean_runtime_s - 0.022).abs() < 1e-12);
        assert!((s[2].mean_nmsd_db + 16.0).abs() < 1e-12);
        assert!((s[2].mean_iterations - 33.0).abs() < 1e-12);
        assert!(s.iter().all(|r| r.n_trials == 2));
    }
}
