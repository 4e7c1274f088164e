use crate::correlators::EstimatorResult;
use crate::{Error, Result, C64};

/// Streaming per-point mean and variance of complex samples (Welford),
/// mergeable so that parallel partial sums combine deterministically.
#[derive(Clone, Debug)]
pub struct Accumulator {
    n: u64,
    mean: Vec<C64>,
    m2_re: Vec<f64>,
    m2_im: Vec<f64>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![C64::new(0.0, 0.0); len],
            m2_re: vec![0.0; len],
            m2_im: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, sample: &[C64]) {
        assert_eq!(sample.len(), self.len(), "sample length mismatch");
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for (k, &x) in sample.iter().enumerate() {
            let d = x - self.mean[k];
            self.mean[k] += d * inv;
            let d2 = x - self.mean[k];
            self.m2_re[k] += d.re * d2.re;
            self.m2_im[k] += d.im * d2.im;
        }
    }

    /// Chan's pairwise update.
    pub fn merge(&mut self, other: &Accumulator) {
        assert_eq!(other.len(), self.len(), "accumulator length mismatch");
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for k in 0..self.len() {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * (nb / n);
            self.m2_re[k] += other.m2_re[k] + d.re * d.re * na * nb / n;
            self.m2_im[k] += other.m2_im[k] + d.im * d.im * na * nb / n;
        }
        self.n += other.n;
    }

    pub fn mean(&self) -> &[C64] {
        &self.mean
    }

    /// Standard errors of the mean of the real and imaginary parts, using
    /// the unbiased sample variance.
    pub fn stderr(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let f = |m2: &f64| (m2.max(0.0) / (n - 1.0) / n).sqrt();
        (self.m2_re.iter().map(f).collect(), self.m2_im.iter().map(f).collect())
    }

    pub fn finish(&self, times: Vec<f64>) -> Result<EstimatorResult> {
        if self.n < 2 {
            return Err(Error::invalid("sample count", "need at least 2 samples"));
        }
        if times.len() != self.len() {
            return Err(Error::Dimension {
                op: "estimator grid",
                expected: self.len(),
                found: times.len(),
            });
        }
        let (stderr_re, stderr_im) = self.stderr();
        Ok(EstimatorResult {
            times,
            values: self.mean.clone(),
            stderr_re,
            stderr_im,
            n_samples: self.n as usize,
        })
    }
}

/// Mean and standard error per grid point from per-trajectory samples.
pub fn ensemble_stats(times: &[f64], samples: &[Vec<C64>]) -> Result<EstimatorResult> {
    let mut acc = Accumulator::new(times.len());
    for s in samples {
        if s.len() != times.len() {
            return Err(Error::Dimension {
                op: "ensemble_stats",
                expected: times.len(),
                found: s.len(),
            });
        }
        acc.push(s);
    }
    acc.finish(times.to_vec())
}
