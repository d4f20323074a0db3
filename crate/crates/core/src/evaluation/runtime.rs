use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distance::Pool;
use crate::error::{Error, Result};
use crate::selection::{tsdm_reduce, SelectionSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeObservation {
    pub n: usize,
    pub s_avg: f64,
    pub seconds: f64,
}

impl RuntimeObservation {
    /// The model's regressor, `s_avg · n²`.
    pub fn load(&self) -> f64 {
        self.s_avg * (self.n as f64).powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeFit {
    pub a: f64,
    pub r2: f64,
}

impl RuntimeFit {
    pub fn predict(&self, n: usize, s_avg: f64) -> f64 {
        self.a * s_avg * (n as f64).powi(2)
    }
}

/// Least squares for `seconds = a · s_avg · n²` with no intercept. R² is
/// measured against the mean-seconds baseline, so it can go negative for a
/// model that fits worse than a constant.
pub fn fit_runtime_model(obs: &[RuntimeObservation]) -> Result<RuntimeFit> {
    let mut ns: Vec<usize> = obs.iter().map(|o| o.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::Fit(format!(
            "need observations at 3 or more distinct pool sizes, got {}",
            ns.len()
        )));
    }
    if let Some(bad) = obs.iter().find(|o| {
        o.n == 0
            || o.s_avg.is_nan()
            || o.s_avg <= 0.0
            || o.seconds.is_nan()
            || o.seconds <= 0.0
            || !o.seconds.is_finite()
    }) {
        return Err(Error::Fit(format!("observation values must be positive: {bad:?}")));
    }
    let sxy: f64 = obs.iter().map(|o| o.load() * o.seconds).sum();
    let sxx: f64 = obs.iter().map(|o| o.load() * o.load()).sum();
    let a = sxy / sxx;
    let mean = obs.iter().map(|o| o.seconds).sum::<f64>() / obs.len() as f64;
    let ss_tot: f64 = obs.iter().map(|o| (o.seconds - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Fit("all timings identical; R² undefined".into()));
    }
    let ss_res: f64 = obs.iter().map(|o| (o.seconds - a * o.load()).powi(2)).sum();
    Ok(RuntimeFit {
        a,
        r2: 1.0 - ss_res / ss_tot,
    })
}

/// Times one full reduction of `pool`.
pub fn time_reduction(pool: &Pool) -> Result<(SelectionSequence, RuntimeObservation)> {
    let start = Instant::now();
    let seq = tsdm_reduce(pool)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok((
        seq,
        RuntimeObservation {
            n: pool.len(),
            s_avg: pool.mean_length(),
            seconds,
        },
    ))
}
