//! Multi-Lorentzian fits of ODMR spectra.
//!
//! Each peak is `A·w²/((ν−ν₀)² + w²)` on a common baseline, with `w` the
//! half width at half maximum. Amplitudes may be negative so fluorescence
//! dips and spin-flip peaks are fitted by the same code.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::HYPERFINE_SPLITTING_MHZ;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub frequency_mhz: f64,
    pub signal: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    points: Vec<SpectrumSample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    frequency_mhz: f64,
    signal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

impl Spectrum {
    pub const MIN_POINTS: usize = 10;

    pub fn new(points: Vec<SpectrumSample>) -> Result<Self> {
        if points.len() < Self::MIN_POINTS {
            return Err(Error::InvalidSpectrum(format!(
                "need at least {} points, got {}",
                Self::MIN_POINTS,
                points.len()
            )));
        }
        if points.iter().any(|p| !p.frequency_mhz.is_finite() || !p.signal.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite frequency or signal".into()));
        }
        if points.iter().any(|p| p.sigma.is_some_and(|s| !(s > 0.0 && s.is_finite()))) {
            return Err(Error::InvalidSpectrum("sigma must be positive".into()));
        }
        if points.windows(2).any(|w| w[1].frequency_mhz <= w[0].frequency_mhz) {
            return Err(Error::InvalidSpectrum("frequencies must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn from_xy(frequencies: &[f64], signal: &[f64]) -> Result<Self> {
        if frequencies.len() != signal.len() {
            return Err(Error::InvalidSpectrum("frequency and signal lengths differ".into()));
        }
        Self::new(
            frequencies
                .iter()
                .zip(signal)
                .map(|(&f, &s)| SpectrumSample {
                    frequency_mhz: f,
                    signal: s,
                    sigma: None,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[SpectrumSample] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads `frequency_mhz,signal[,sigma]` with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["frequency_mhz", "signal"];
        if headers.len() < 2 || headers.iter().take(2).ne(expected) || headers.len() > 3 {
            return Err(Error::InvalidSpectrum(format!(
                "expected header 'frequency_mhz,signal[,sigma]', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        if headers.len() == 3 && &headers[2] != "sigma" {
            return Err(Error::InvalidSpectrum(format!("unknown third column '{}'", &headers[2])));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row?;
            points.push(SpectrumSample {
                frequency_mhz: row.frequency_mhz,
                signal: row.signal,
                sigma: row.sigma,
            });
        }
        Self::new(points)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_sigma = self.points.iter().any(|p| p.sigma.is_some());
        let mut w = csv::Writer::from_writer(writer);
        if with_sigma {
            w.write_record(["frequency_mhz", "signal", "sigma"])?;
        } else {
            w.write_record(["frequency_mhz", "signal"])?;
        }
        for p in &self.points {
            let mut rec = vec![p.frequency_mhz.to_string(), p.signal.to_string()];
            if with_sigma {
                rec.push(p.sigma.map(|s| s.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center_mhz: f64,
    pub amplitude: f64,
    /// Half width at half maximum, MHz.
    pub hwhm_mhz: f64,
}

impl Peak {
    fn value(&self, nu: f64) -> f64 {
        let u = nu - self.center_mhz;
        let w2 = self.hwhm_mhz * self.hwhm_mhz;
        self.amplitude * w2 / (u * u + w2)
    }

    /// First, second and third derivatives with respect to ν.
    fn derivatives(&self, nu: f64) -> (f64, f64, f64) {
        let u = nu - self.center_mhz;
        let w2 = self.hwhm_mhz * self.hwhm_mhz;
        let d = u * u + w2;
        let aw2 = self.amplitude * w2;
        let d1 = -2.0 * aw2 * u / (d * d);
        let d2 = -2.0 * aw2 * (w2 - 3.0 * u * u) / (d * d * d);
        let d3 = 24.0 * aw2 * u * (w2 - u * u) / (d * d * d * d);
        (d1, d2, d3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianModel {
    pub baseline: f64,
    pub peaks: Vec<Peak>,
}

impl LorentzianModel {
    pub fn evaluate(&self, nu: f64) -> f64 {
        self.baseline + self.peaks.iter().map(|p| p.value(nu)).sum::<f64>()
    }

    pub fn derivative(&self, nu: f64) -> f64 {
        self.peaks.iter().map(|p| p.derivatives(nu).0).sum()
    }

    fn derivatives(&self, nu: f64) -> (f64, f64, f64) {
        self.peaks.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| {
            let (x, y, z) = p.derivatives(nu);
            (a + x, b + y, c + z)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.peaks.iter().any(|p| !(p.hwhm_mhz > 0.0) || !p.center_mhz.is_finite() || !p.amplitude.is_finite()) {
            return Err(Error::InvalidParameter("every peak needs finite parameters and hwhm > 0".into()));
        }
        Ok(())
    }

    /// Sum of squared (σ-weighted) residuals against `s`.
    pub fn residual(&self, s: &Spectrum) -> f64 {
        s.points
            .iter()
            .map(|p| {
                let r = (p.signal - self.evaluate(p.frequency_mhz)) / p.sigma.unwrap_or(1.0);
                r * r
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// One width shared by all peaks.
    pub shared_width: bool,
    /// Expected peak spacing used to seed centres, MHz.
    pub spacing_prior_mhz: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            shared_width: false,
            spacing_prior_mhz: HYPERFINE_SPLITTING_MHZ,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: LorentzianModel,
    /// Parameter names, in covariance order.
    pub parameters: Vec<String>,
    /// Covariance from the Jacobian at the optimum. Without per-point sigma
    /// it is scaled by the reduced residual.
    pub covariance: Vec<Vec<f64>>,
    /// Sum of squared weighted residuals.
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
}

impl FitReport {
    /// One-sigma uncertainty of each parameter.
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.covariance.len()).map(|i| self.covariance[i][i].max(0.0).sqrt()).collect()
    }
}

/// Maps between a model and the flat parameter vector.
struct Layout {
    n: usize,
    shared: bool,
}

impl Layout {
    fn len(&self) -> usize {
        if self.shared {
            2 + 2 * self.n
        } else {
            1 + 3 * self.n
        }
    }

    fn names(&self) -> Vec<String> {
        let mut v = vec!["baseline".to_string()];
        for k in 0..self.n {
            v.push(format!("center_{k}"));
            v.push(format!("amplitude_{k}"));
            if !self.shared {
                v.push(format!("hwhm_{k}"));
            }
        }
        if self.shared {
            v.push("hwhm".into());
        }
        v
    }

    fn pack(&self, m: &LorentzianModel) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(m.baseline);
        for p in &m.peaks {
            v.push(p.center_mhz);
            v.push(p.amplitude);
            if !self.shared {
                v.push(p.hwhm_mhz);
            }
        }
        if self.shared {
            let w = m.peaks.iter().map(|p| p.hwhm_mhz).sum::<f64>() / self.n as f64;
            v.push(w);
        }
        DVector::from_vec(v)
    }

    fn unpack(&self, v: &DVector<f64>) -> LorentzianModel {
        let stride = if self.shared { 2 } else { 3 };
        let peaks = (0..self.n)
            .map(|k| {
                let o = 1 + stride * k;
                Peak {
                    center_mhz: v[o],
                    amplitude: v[o + 1],
                    hwhm_mhz: if self.shared { v[self.len() - 1] } else { v[o + 2] },
                }
            })
            .collect();
        LorentzianModel { baseline: v[0], peaks }
    }

    /// Row of ∂model/∂parameter at `nu`.
    fn jacobian_row(&self, m: &LorentzianModel, nu: f64, row: &mut [f64]) {
        row.fill(0.0);
        row[0] = 1.0;
        let stride = if self.shared { 2 } else { 3 };
        for (k, p) in m.peaks.iter().enumerate() {
            let u = nu - p.center_mhz;
            let w = p.hwhm_mhz;
            let w2 = w * w;
            let d = u * u + w2;
            let o = 1 + stride * k;
            row[o] = 2.0 * p.amplitude * w2 * u / (d * d);
            row[o + 1] = w2 / d;
            let dw = 2.0 * p.amplitude * w * u * u / (d * d);
            if self.shared {
                row[self.len() - 1] += dw;
            } else {
                row[o + 2] = dw;
            }
        }
    }
}

fn moving_average(y: &[f64], half: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Initial model from peak-finding on the smoothed signal.
///
/// Local extrema are taken in order of height with a minimum separation of
/// half the spacing prior; missing peaks are placed on the spacing lattice
/// around the ones found.
pub fn initial_guess(s: &Spectrum, n_peaks: usize, spacing_mhz: f64) -> LorentzianModel {
    let x: Vec<f64> = s.points.iter().map(|p| p.frequency_mhz).collect();
    let y: Vec<f64> = s.points.iter().map(|p| p.signal).collect();
    let smooth = moving_average(&y, 2);
    let baseline = median(&smooth);
    let hi = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let sign = if hi - baseline >= baseline - lo { 1.0 } else { -1.0 };
    let h: Vec<f64> = smooth.iter().map(|v| sign * (v - baseline)).collect();

    let mut candidates: Vec<usize> = (0..h.len())
        .filter(|&i| (i == 0 || h[i] >= h[i - 1]) && (i + 1 == h.len() || h[i] >= h[i + 1]) && h[i] > 0.0)
        .collect();
    candidates.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));

    let min_sep = 0.5 * spacing_mhz;
    let mut centers: Vec<f64> = Vec::new();
    for i in candidates {
        if centers.len() == n_peaks {
            break;
        }
        if centers.iter().all(|c| (c - x[i]).abs() >= min_sep) {
            centers.push(x[i]);
        }
    }
    let (x_min, x_max) = (x[0], x[x.len() - 1]);
    if centers.is_empty() {
        centers.push(0.5 * (x_min + x_max));
    }
    let anchor = centers[0];
    let mut k = 1;
    while centers.len() < n_peaks && k < 64 {
        for c in [anchor + k as f64 * spacing_mhz, anchor - k as f64 * spacing_mhz] {
            if centers.len() < n_peaks && centers.iter().all(|e| (e - c).abs() >= min_sep) {
                centers.push(c);
            }
        }
        k += 1;
    }
    centers.sort_by(f64::total_cmp);

    // Width from the half-maximum crossings of the tallest feature.
    let top = (0..h.len()).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap_or(0);
    let half = 0.5 * h[top];
    let mut l = top;
    while l > 0 && h[l] > half {
        l -= 1;
    }
    let mut r = top;
    while r + 1 < h.len() && h[r] > half {
        r += 1;
    }
    let dx = (x_max - x_min) / (x.len() - 1) as f64;
    let hwhm = (0.5 * (x[r] - x[l])).clamp(2.0 * dx, 0.5 * spacing_mhz.max(4.0 * dx));

    let nearest = |c: f64| {
        x.iter()
            .enumerate()
            .min_by(|a, b| (a.1 - c).abs().total_cmp(&(b.1 - c).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let peaks = centers
        .into_iter()
        .map(|c| Peak {
            center_mhz: c,
            amplitude: sign * h[nearest(c)].max(1e-3 * (hi - lo)),
            hwhm_mhz: hwhm,
        })
        .collect();
    LorentzianModel { baseline, peaks }
}

/// Damped Gauss–Newton (Levenberg–Marquardt) fit of `n_peaks` Lorentzians.
///
/// Steps are accepted only when they lower the residual, so the residual is
/// monotone non-increasing and never exceeds that of the initial model.
pub fn fit_lorentzians(
    s: &Spectrum,
    n_peaks: usize,
    init: Option<&LorentzianModel>,
    opts: &FitOptions,
) -> Result<FitReport> {
    if n_peaks == 0 {
        return Err(Error::InvalidParameter("need at least one peak".into()));
    }
    if s.len() < 3 * n_peaks + 1 {
        return Err(Error::InvalidSpectrum(format!(
            "{} points cannot constrain {} peaks",
            s.len(),
            n_peaks
        )));
    }
    let start = match init {
        Some(m) => {
            if m.peaks.len() != n_peaks {
                return Err(Error::InvalidParameter(format!(
                    "initial model has {} peaks, expected {n_peaks}",
                    m.peaks.len()
                )));
            }
            m.validate()?;
            m.clone()
        }
        None => initial_guess(s, n_peaks, opts.spacing_prior_mhz),
    };

    let layout = Layout {
        n: n_peaks,
        shared: opts.shared_width,
    };
    let np = layout.len();
    let m = s.len();
    let weights: Vec<f64> = s.points.iter().map(|p| 1.0 / p.sigma.unwrap_or(1.0)).collect();

    let residuals = |model: &LorentzianModel| -> DVector<f64> {
        DVector::from_iterator(
            m,
            s.points
                .iter()
                .zip(&weights)
                .map(|(p, w)| (p.signal - model.evaluate(p.frequency_mhz)) * w),
        )
    };
    let jacobian = |model: &LorentzianModel| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(m, np);
        let mut row = vec![0.0; np];
        for (i, (p, w)) in s.points.iter().zip(&weights).enumerate() {
            layout.jacobian_row(model, p.frequency_mhz, &mut row);
            for (k, v) in row.iter().enumerate() {
                j[(i, k)] = v * w;
            }
        }
        j
    };
    let admissible = |v: &DVector<f64>| {
        v.iter().all(|x| x.is_finite()) && layout.unpack(v).peaks.iter().all(|p| p.hwhm_mhz > 0.0)
    };

    let mut params = layout.pack(&start);
    let mut model = layout.unpack(&params);
    let mut r = residuals(&model);
    let initial_residual = r.norm_squared();
    let mut cost = initial_residual;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let j = jacobian(&model);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() <= 1e-15 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &params + &delta;
            if !admissible(&trial) {
                lambda *= 10.0;
                continue;
            }
            let trial_model = layout.unpack(&trial);
            let trial_r = residuals(&trial_model);
            let trial_cost = trial_r.norm_squared();
            if trial_cost < cost {
                let small_step = delta
                    .iter()
                    .zip(params.iter())
                    .all(|(d, p)| d.abs() <= 1e-12 * (p.abs() + 1e-12));
                let small_gain = cost - trial_cost <= 1e-14 * cost;
                params = trial;
                model = trial_model;
                r = trial_r;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = small_step || small_gain;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at machine precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitNotConverged(iterations));
    }

    let j = jacobian(&model);
    let jtj = j.transpose() * &j;
    let inv = jtj.cholesky().ok_or(Error::DegenerateJacobian)?.inverse();
    let scale = if s.points.iter().all(|p| p.sigma.is_some()) {
        1.0
    } else {
        cost / (m.saturating_sub(np)).max(1) as f64
    };
    let covariance = (0..np).map(|a| (0..np).map(|b| inv[(a, b)] * scale).collect()).collect();

    Ok(FitReport {
        model,
        parameters: layout.names(),
        covariance,
        residual: cost,
        initial_residual,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeExtremum {
    pub frequency_mhz: f64,
    /// Signed derivative of the model at `frequency_mhz`, per MHz.
    pub slope: f64,
}

/// Location and value of the steepest slope of the model.
///
/// A dense scan brackets the global extremum of `|dL/dν|`, which Newton's
/// method on `d²L/dν² = 0` then refines. A flat model returns slope 0 at
/// the middle of its natural domain.
pub fn max_slope_from_fit(m: &LorentzianModel) -> SlopeExtremum {
    let active: Vec<&Peak> = m.peaks.iter().filter(|p| p.amplitude != 0.0 && p.hwhm_mhz > 0.0).collect();
    let (lo, hi) = if m.peaks.is_empty() {
        (0.0, 0.0)
    } else {
        let wmax = m.peaks.iter().map(|p| p.hwhm_mhz.abs()).fold(0.0, f64::max);
        let cmin = m.peaks.iter().map(|p| p.center_mhz).fold(f64::INFINITY, f64::min);
        let cmax = m.peaks.iter().map(|p| p.center_mhz).fold(f64::NEG_INFINITY, f64::max);
        (cmin - 10.0 * wmax, cmax + 10.0 * wmax)
    };
    if active.is_empty() {
        return SlopeExtremum {
            frequency_mhz: 0.5 * (lo + hi),
            slope: 0.0,
        };
    }

    let wmin = active.iter().map(|p| p.hwhm_mhz).fold(f64::INFINITY, f64::min);
    let n = (((hi - lo) / (wmin / 20.0)).ceil() as usize).clamp(2000, 200_000);
    let dx = (hi - lo) / n as f64;
    let (mut best_nu, mut best) = (lo, m.derivative(lo));
    for k in 1..=n {
        let nu = lo + k as f64 * dx;
        let d = m.derivative(nu);
        if d.abs() > best.abs() {
            best_nu = nu;
            best = d;
        }
    }

    let mut nu = best_nu;
    for _ in 0..50 {
        let (_, d2, d3) = m.derivatives(nu);
        if d3 == 0.0 {
            break;
        }
        let step = (d2 / d3).clamp(-dx, dx);
        nu -= step;
        if step.abs() <= 1e-14 * (1.0 + nu.abs()) {
            break;
        }
    }
    let refined = m.derivative(nu);
    if refined.abs() >= best.abs() && (nu - best_nu).abs() <= 2.0 * dx {
        SlopeExtremum {
            frequency_mhz: nu,
            slope: refined,
        }
    } else {
        SlopeExtremum {
            frequency_mhz: best_nu,
            slope: best,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: &LorentzianModel, lo: f64, hi: f64, n: usize) -> Spectrum {
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| model.evaluate(v)).collect();
        Spectrum::from_xy(&x, &y).unwrap()
    }

    fn single() -> LorentzianModel {
        LorentzianModel {
            baseline: 0.1,
            peaks: vec![Peak {
                center_mhz: 0.4,
                amplitude: -0.8,
                hwhm_mhz: 0.35,
            }],
        }
    }

    #[test]
    fn noiseless_single_peak_recovered_exactly() {
        let truth = single();
        let s = sample(&truth, -3.0, 3.0, 301);
        let fit = fit_lorentzians(&s, 1, None, &FitOptions::default()).unwrap();
        let p = fit.model.peaks[0];
        let t = truth.peaks[0];
        assert!(((p.center_mhz - t.center_mhz) / t.center_mhz).abs() < 1e-8);
        assert!(((p.amplitude - t.amplitude) / t.amplitude).abs() < 1e-8);
        assert!(((p.hwhm_mhz - t.hwhm_mhz) / t.hwhm_mhz).abs() < 1e-8);
        assert!(((fit.model.baseline - truth.baseline) / truth.baseline).abs() < 1e-8);
    }

    #[test]
    fn analytic_single_peak_slope() {
        let m = single();
        let p = m.peaks[0];
        let e = max_slope_from_fit(&m);
        let expected = 3.0 * 3f64.sqrt() / 8.0 * p.amplitude.abs() / p.hwhm_mhz;
        assert!((e.slope.abs() - expected).abs() < 1e-12 * expected);
        let offset = (e.frequency_mhz - p.center_mhz).abs();
        assert!((offset - p.hwhm_mhz / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_triplet_has_symmetric_extrema() {
        let peak = |c| Peak {
            center_mhz: c,
            amplitude: 1.0,
            hwhm_mhz: 0.5,
        };
        let m = LorentzianModel {
            baseline: 0.0,
            peaks: vec![peak(-2.16), peak(0.0), peak(2.16)],
        };
        let e = max_slope_from_fit(&m);
        let mirror = m.derivative(-e.frequency_mhz);
        assert!((mirror + e.slope).abs() < 1e-12);
    }

    #[test]
    fn flat_model_has_zero_slope_at_midpoint() {
        let m = LorentzianModel {
            baseline: 1.0,
            peaks: vec![Peak {
                center_mhz: 2.0,
                amplitude: 0.0,
                hwhm_mhz: 1.0,
            }],
        };
        let e = max_slope_from_fit(&m);
        assert_eq!(e.slope, 0.0);
        assert!((e.frequency_mhz - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_rejected() {
        let s = sample(&single(), -1.0, 1.0, 12);
        assert!(fit_lorentzians(&s, 4, None, &FitOptions::default()).is_err());
        assert!(fit_lorentzians(&s, 0, None, &FitOptions::default()).is_err());
        assert!(Spectrum::from_xy(&[0.0; 5], &[0.0; 5]).is_err());
        let x: Vec<f64> = (0..12).map(|i| (i / 2) as f64).collect();
        assert!(Spectrum::from_xy(&x, &[0.0; 12]).is_err());
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let s = sample(&single(), -1.0, 1.0, 11);
        let mut buf = Vec::new();
        s.to_csv(&mut buf).unwrap();
        let back = Spectrum::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        let bad = "freq,signal\n0,1\n";
        assert!(Spectrum::from_csv(bad.as_bytes()).is_err());
        let with_sigma = (0..10).fold("frequency_mhz,signal,sigma\n".to_string(), |acc, i| {
            acc + &format!("{i},0.5,0.01\n")
        });
        let s = Spectrum::from_csv(with_sigma.as_bytes()).unwrap();
        assert_eq!(s.points()[3].sigma, Some(0.01));
    }

    #[test]
    fn shared_width_fit() {
        let peak = |c, a| Peak {
            center_mhz: c,
            amplitude: a,
            hwhm_mhz: 0.4,
        };
        let truth = LorentzianModel {
            baseline: 0.0,
            peaks: vec![peak(-2.16, 0.3), peak(0.0, 0.5), peak(2.16, 0.4)],
        };
        let s = sample(&truth, -5.0, 5.0, 401);
        let opts = FitOptions {
            shared_width: true,
            ..FitOptions::default()
        };
        let fit = fit_lorentzians(&s, 3, None, &opts).unwrap();
        assert_eq!(fit.parameters.len(), 8);
        for (p, t) in fit.model.peaks.iter().zip(&truth.peaks) {
            assert!((p.center_mhz - t.center_mhz).abs() < 1e-8);
            assert!((p.hwhm_mhz - 0.4).abs() < 1e-8);
        }
    }
}
