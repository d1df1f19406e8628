//! Poisson Monte-Carlo error bars: redraw every count from a Poisson law
//! around its observed value, re-evaluate the metric, and report the sample
//! standard deviation.

use rayon::prelude::*;

use crate::counts::CoincidenceTable;
use crate::error::{Error, Result};
use crate::memsim::PathNumberCounts;
use crate::memsim::sample_poisson;
use crate::metrics::FringeScan;
use crate::rng::{substream, Domain};
use crate::timetags::Histogram;
use crate::tomography::TomographyRecord;

pub const DEFAULT_RESAMPLES: usize = 20;
/// Redraws allowed per resample when the metric is undefined on a draw.
pub const MAX_RETRIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBarReport {
    pub value: f64,
    pub sigma: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

/// A structure whose counts can be read out and replaced.
pub trait CountData: Sized {
    fn counts(&self) -> Vec<f64>;
    fn with_counts(&self, counts: &[f64]) -> Self;
}

impl CountData for Vec<f64> {
    fn counts(&self) -> Vec<f64> {
        self.clone()
    }
    fn with_counts(&self, counts: &[f64]) -> Self {
        counts.to_vec()
    }
}

impl CountData for CoincidenceTable {
    fn counts(&self) -> Vec<f64> {
        self.counts.clone()
    }
    fn with_counts(&self, counts: &[f64]) -> Self {
        CoincidenceTable { counts: counts.to_vec(), ..self.clone() }
    }
}

impl CountData for TomographyRecord {
    fn counts(&self) -> Vec<f64> {
        self.counts.to_vec()
    }
    fn with_counts(&self, counts: &[f64]) -> Self {
        let mut out = self.clone();
        out.counts.copy_from_slice(counts);
        out
    }
}

impl CountData for PathNumberCounts {
    fn counts(&self) -> Vec<f64> {
        self.as_vec()
    }
    fn with_counts(&self, counts: &[f64]) -> Self {
        self.from_vec(counts)
    }
}

impl CountData for FringeScan {
    fn counts(&self) -> Vec<f64> {
        self.counts.clone()
    }
    fn with_counts(&self, counts: &[f64]) -> Self {
        FringeScan { phases: self.phases.clone(), counts: counts.to_vec() }
    }
}

impl CountData for Histogram {
    fn counts(&self) -> Vec<f64> {
        self.counts.clone()
    }
    fn with_counts(&self, counts: &[f64]) -> Self {
        Histogram { centers: self.centers.clone(), counts: counts.to_vec() }
    }
}

/// `value = metric(data)`; `sigma` = sample std of the metric over `n`
/// Poisson redraws of every count. Deterministic in `seed` regardless of
/// thread count.
pub fn poisson_resample_metric<D, F>(data: &D, metric: F, n: usize, seed: u64) -> Result<ErrorBarReport>
where
    D: CountData + Sync,
    F: Fn(&D) -> Result<f64> + Sync,
{
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 resamples, got {n}")));
    }
    let base = data.counts();
    if let Some(c) = base.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidInput(format!("count {c} is not a non-negative number")));
    }
    let value = metric(data)?;
    if !value.is_finite() {
        return Err(Error::Degenerate(format!("metric is {value} on the observed counts")));
    }
    let draws = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, Domain::Resample, 0, r as u64);
            let mut last = None;
            for _ in 0..=MAX_RETRIES {
                let counts: Vec<f64> = base.iter().map(|&m| sample_poisson(&mut rng, m)).collect();
                match metric(&data.with_counts(&counts)) {
                    Ok(v) if v.is_finite() => return Ok(v),
                    Ok(v) => last = Some(Error::Degenerate(format!("metric is {v}"))),
                    Err(e) => last = Some(e),
                }
            }
            Err(Error::Degenerate(format!(
                "metric undefined on resample {r} after {MAX_RETRIES} retries: {}",
                last.map(|e| e.to_string()).unwrap_or_default()
            )))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(ErrorBarReport { value, sigma: var.sqrt(), n_resamples: n, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{path_concurrence, PathNumberMatrix};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn first(v: &Vec<f64>) -> Result<f64> {
        Ok(v[0])
    }

    #[test]
    fn zero_counts_have_zero_sigma() {
        let r = poisson_resample_metric(&vec![0.0, 0.0], |v: &Vec<f64>| Ok(v[0] + v[1]), 20, 1).unwrap();
        assert_eq!((r.value, r.sigma), (0.0, 0.0));
    }

    #[test]
    fn sqrt_n_for_a_raw_count() {
        let r = poisson_resample_metric(&vec![10_000.0], first, 1000, 5).unwrap();
        assert_eq!(r.value, 10_000.0);
        assert!((r.sigma - 100.0).abs() <= 10.0, "sigma = {}", r.sigma);
    }

    #[test]
    fn value_independent_of_n_and_seed() {
        let data = vec![40.0, 17.0];
        let ratio = |v: &Vec<f64>| Ok(v[0] / (v[0] + v[1]));
        let a = poisson_resample_metric(&data, ratio, 20, 1).unwrap();
        let b = poisson_resample_metric(&data, ratio, 300, 9).unwrap();
        assert_eq!(a.value, b.value);
        assert_ne!(a.sigma, b.sigma);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let data = vec![123.0, 456.0, 789.0];
        let run = || poisson_resample_metric(&data, |v: &Vec<f64>| Ok(v[0] * v[1] / v[2]), 200, 3).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, many);
    }

    #[test]
    fn sigma_scales_as_inverse_sqrt_exposure() {
        let base = [4.59e-3, 5.04e-3, 1.6e-6];
        let metric = |v: &Vec<f64>| {
            let n = v[0] + v[1] + v[2] + v[3];
            path_concurrence(&PathNumberMatrix::new(v[0] / n, v[1] / n, v[2] / n, v[3] / n, 0.869)?)
        };
        let mut pts = Vec::new();
        for exposure in [1e7, 4e7, 1.6e8, 6.4e8] {
            let counts = vec![exposure * (1.0 - base.iter().sum::<f64>()), exposure * base[0], exposure * base[1], exposure * base[2]];
            let r = poisson_resample_metric(&counts, metric, 400, 17).unwrap();
            pts.push((exposure.ln(), r.sigma.ln()));
        }
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
    }

    #[test]
    fn undefined_draws_are_retried() {
        let calls = AtomicUsize::new(0);
        let flaky = |v: &Vec<f64>| {
            if calls.fetch_add(1, Ordering::SeqCst) % 3 == 1 {
                Err(Error::Degenerate("flaky".into()))
            } else {
                Ok(v[0])
            }
        };
        assert!(poisson_resample_metric(&vec![50.0], flaky, 30, 2).is_ok());
        let never = |v: &Vec<f64>| if v[0] == 3.0 { Ok(3.0) } else { Err(Error::Degenerate("undefined".into())) };
        assert!(matches!(poisson_resample_metric(&vec![3.0], never, 5, 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(poisson_resample_metric(&vec![1.0], first, 1, 0).is_err());
        assert!(poisson_resample_metric(&vec![-1.0], first, 5, 0).is_err());
    }
}
