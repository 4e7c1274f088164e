use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::correlators::EstimatorResult;
use crate::{Error, Result, C64};

/// Default correlation window in units of `1/γ`.
pub const DEFAULT_TAU_MAX: f64 = 8.0;
/// Default correlation sampling step in units of `1/γ`.
pub const DEFAULT_DTAU: f64 = 1.0 / 128.0;

/// Fraction of the τ grid tail averaged to estimate the long-time constant.
const TAIL_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    /// Subtract the long-time limit (coherent part) before transforming.
    pub subtract_coherent: bool,
    /// Multiply by a half Hann window `½(1 + cos(πτ/τ_max))`.
    pub hann: bool,
    /// Minimum transform length; the correlation is zero padded up to it.
    pub min_len: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            subtract_coherent: true,
            hann: false,
            min_len: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumMeta {
    pub n_traj: usize,
    pub tau_max: f64,
    pub dtau: f64,
    pub subtracted: C64,
    pub hann: bool,
}

/// `S(ω) = ∫ C(τ) e^{−iωτ} dτ` over the Hermitian extension of `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub frequencies: Vec<f64>,
    pub intensities: Vec<f64>,
    /// Standard error per frequency, propagated from the per-τ errors
    /// treating different τ as uncorrelated.
    pub stderr: Vec<f64>,
    /// Largest imaginary part of the transform, relative to the largest
    /// real part.
    pub imag_ratio: f64,
    pub metadata: SpectrumMeta,
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::invalid("tau grid", "need at least two points"));
    }
    if times[0].abs() > 1e-12 {
        return Err(Error::invalid("tau grid", "must start at 0"));
    }
    let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::invalid("tau grid", "must be increasing"));
    }
    for (k, t) in times.iter().enumerate() {
        if (t - k as f64 * step).abs() > 1e-9 * step.max(1.0) {
            return Err(Error::invalid("tau grid", "must be uniform"));
        }
    }
    Ok(step)
}

/// Discrete Fourier transform of a two-time correlation sampled on a uniform
/// grid `τ = 0, Δτ, …`, reported on a frequency grid symmetric about 0.
pub fn spectrum_from_correlation(corr: &EstimatorResult, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let dtau = uniform_step(&corr.times)?;
    let n = corr.len();
    let tau_max = corr.times[n - 1];

    let subtracted = if opts.subtract_coherent {
        let tail = ((n as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, n);
        corr.values[n - tail..].iter().sum::<C64>() / tail as f64
    } else {
        C64::new(0.0, 0.0)
    };
    let window: Vec<f64> = corr
        .times
        .iter()
        .map(|t| {
            if opts.hann {
                0.5 * (1.0 + (PI * t / tau_max).cos())
            } else {
                1.0
            }
        })
        .collect();

    let mut len = (2 * n - 1).max(opts.min_len);
    if len.is_multiple_of(2) {
        len += 1;
    }
    let mut buf = vec![C64::new(0.0, 0.0); len];
    buf[0] = C64::new((corr.values[0] - subtracted).re * window[0], 0.0);
    for j in 1..n {
        let c = (corr.values[j] - subtracted) * window[j];
        buf[j] = c;
        buf[len - j] = c.conj();
    }
    // Variance of S_k: Δτ²·[se_re0² + 2Σ w²(se_re² + se_im²) + 2Σ w²(se_re² − se_im²)·cos(2ω_k τ_j)].
    let mut var_osc = vec![C64::new(0.0, 0.0); len];
    let mut var_flat = (corr.stderr_re[0] * window[0]).powi(2);
    for j in 1..n {
        let (a, b) = (corr.stderr_re[j].powi(2), corr.stderr_im[j].powi(2));
        let w2 = window[j] * window[j];
        var_flat += 2.0 * w2 * (a + b);
        var_osc[j] = C64::new(w2 * (a - b), 0.0);
    }

    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    fft.process(&mut buf);
    fft.process(&mut var_osc);

    let half = (len - 1) / 2;
    let dw = 2.0 * PI / (len as f64 * dtau);
    let mut frequencies = Vec::with_capacity(len);
    let mut intensities = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let (mut max_re, mut max_im) = (0.0f64, 0.0f64);
    for k in -(half as i64)..=(half as i64) {
        let idx = k.rem_euclid(len as i64) as usize;
        let s = buf[idx] * dtau;
        max_re = max_re.max(s.re.abs());
        max_im = max_im.max(s.im.abs());
        frequencies.push(k as f64 * dw);
        intensities.push(s.re);
        let idx2 = (2 * k).rem_euclid(len as i64) as usize;
        let var = (var_flat + 2.0 * var_osc[idx2].re).max(0.0);
        stderr.push(dtau * var.sqrt());
    }
    Ok(SpectrumResult {
        frequencies,
        intensities,
        stderr,
        imag_ratio: if max_re > 0.0 { max_im / max_re } else { max_im },
        metadata: SpectrumMeta {
            n_traj: corr.n_samples,
            tau_max,
            dtau,
            subtracted,
            hann: opts.hann,
        },
    })
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Index of the largest intensity with `|ω − center| ≤ half_width`.
    pub fn peak_near(&self, center: f64, half_width: f64) -> Option<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, w)| (*w - center).abs() <= half_width)
            .max_by(|a, b| self.intensities[a.0].total_cmp(&self.intensities[b.0]))
            .map(|(k, _)| k)
    }

    /// Full width at half maximum of the peak at `index`, with linear
    /// interpolation between grid points. `None` if either side never drops
    /// below half the peak height.
    pub fn fwhm(&self, index: usize) -> Option<f64> {
        let y = &self.intensities;
        let w = &self.frequencies;
        let half = 0.5 * y[index];
        let cross = |a: usize, b: usize| w[a] + (half - y[a]) * (w[b] - w[a]) / (y[b] - y[a]);
        let mut right = None;
        for k in index..y.len() - 1 {
            if y[k + 1] <= half {
                right = Some(cross(k, k + 1));
                break;
            }
        }
        let mut left = None;
        for k in (1..=index).rev() {
            if y[k - 1] <= half {
                left = Some(cross(k, k - 1));
                break;
            }
        }
        Some(right? - left?)
    }

    /// Frequency spacing of the grid.
    pub fn resolution(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }
}
