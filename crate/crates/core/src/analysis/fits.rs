//! Unweighted least-squares lines on log-transformed data.

use crate::policy::POLICY;
use crate::{Error, Result};

const MIN_TAIL_SAMPLES: usize = 8;
const MIN_POWER_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// ln v = ln a − γ t
    ExponentialTail,
    /// ln y = ln c + p ln x
    PowerLaw,
}

/// Closed interval of abscissae.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
}

impl FitWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::FitInput(format!("degenerate window [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    /// Both ends multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.start * factor, self.end * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub window: FitWindow,
    pub n_points: usize,
    /// RMS of the regression residuals in transformed coordinates.
    pub residual_rms: f64,
    /// In [0, 1]; 0 when the transformed data are constant.
    pub r_squared: f64,
}

impl FitResult {
    /// γ of an exponential tail.
    pub fn rate(&self) -> f64 {
        -self.slope
    }

    pub fn amplitude(&self) -> f64 {
        self.intercept.exp()
    }

    /// p of a power law.
    pub fn exponent(&self) -> f64 {
        self.slope
    }

    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    residual_rms: f64,
    r_squared: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<Line> {
    // shifted by the first point so that constant data give exactly zero spread
    let (x0, y0) = (x[0], y[0]);
    let n = x.len() as f64;
    let xm = x.iter().map(|v| v - x0).sum::<f64>() / n;
    let ym = y.iter().map(|v| v - y0).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - x0 - xm, yi - y0 - ym);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::FitInput("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = y0 + ym - slope * (x0 + xm);
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(Line {
        slope,
        intercept,
        residual_rms: (ss_res / n).sqrt(),
        r_squared,
    })
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Last decade of the tail segment: the final run of at least eight
/// consecutive samples above the fit floor, cut at its first sub-floor value.
///
/// For data that stay above the floor until they decay into it, this is the
/// last decade before the first sub-floor sample. Data that touch zero and
/// recover (ergotropy at a passive crossing) are fitted after the recovery.
pub fn default_tail_window(times: &[f64], values: &[f64]) -> Result<FitWindow> {
    check_lengths(times, values)?;
    let mut segment = None;
    let mut run_start = 0;
    for i in 0..=values.len() {
        if i < values.len() && values[i] > POLICY.fit_floor {
            continue;
        }
        if i - run_start >= MIN_TAIL_SAMPLES {
            segment = Some((run_start, i - 1));
        }
        run_start = i + 1;
    }
    let (first, last) =
        segment.ok_or_else(|| Error::FitInput(format!("no run of {MIN_TAIL_SAMPLES} samples above the fit floor")))?;
    let end = times[last];
    FitWindow::new((end / 10.0).max(times[first]), end)
}

fn windowed(times: &[f64], values: &[f64], window: &FitWindow, min: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_lengths(times, values)?;
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| window.contains(**t))
        .map(|(t, v)| (*t, *v))
        .unzip();
    if t.len() < min {
        return Err(Error::FitInput(format!(
            "{} samples in [{}, {}], need {min}",
            t.len(),
            window.start,
            window.end
        )));
    }
    if let Some(bad) = v.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::FitInput(format!("nonpositive value {bad} in fit window")));
    }
    Ok((t, v))
}

/// Fits `v = a·e^{−γt}` on `window`, or on [`default_tail_window`] if `None`.
pub fn fit_exponential_tail(times: &[f64], values: &[f64], window: Option<FitWindow>) -> Result<FitResult> {
    let window = match window {
        Some(w) => w,
        None => default_tail_window(times, values)?,
    };
    let (t, v) = windowed(times, values, &window, MIN_TAIL_SAMPLES)?;
    let ln_v: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let line = least_squares(&t, &ln_v)?;
    Ok(FitResult {
        model: FitModel::ExponentialTail,
        slope: line.slope,
        intercept: line.intercept,
        window,
        n_points: t.len(),
        residual_rms: line.residual_rms,
        r_squared: line.r_squared,
    })
}

/// Fits `y = c·x^p` to all points.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    check_lengths(xs, ys)?;
    if xs.len() < MIN_POWER_POINTS {
        return Err(Error::FitInput(format!("{} points, need {MIN_POWER_POINTS}", xs.len())));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::FitInput(format!("nonpositive input {bad}")));
    }
    let ln_x: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ln_y: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let line = least_squares(&ln_x, &ln_y)?;
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(FitResult {
        model: FitModel::PowerLaw,
        slope: line.slope,
        intercept: line.intercept,
        window: FitWindow::new(lo, hi)?,
        n_points: xs.len(),
        residual_rms: line.residual_rms,
        r_squared: line.r_squared,
    })
}

/// `(R²_exp, R²_pow)` of both models on the same window.
pub fn subexponential_discriminator(times: &[f64], values: &[f64], window: Option<FitWindow>) -> Result<(f64, f64)> {
    let exp = fit_exponential_tail(times, values, window)?;
    let (t, v) = windowed(times, values, &exp.window, MIN_TAIL_SAMPLES)?;
    let pow = fit_power_law(&t, &v)?;
    Ok((exp.r_squared, pow.r_squared))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::log_time_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = linspace(10.0, 100.0, 50);
        let v: Vec<f64> = t.iter().map(|t| (-0.3 * t).exp()).collect();
        let fit = fit_exponential_tail(&t, &v, Some(FitWindow::new(10.0, 100.0).unwrap())).unwrap();
        assert!((fit.rate() - 0.3).abs() < 1e-8);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_points, 50);
    }

    #[test]
    fn constant_values_have_zero_rate_and_r_squared() {
        let t = linspace(1.0, 10.0, 20);
        let fit = fit_exponential_tail(&t, &[0.4; 20], None).unwrap();
        assert_eq!(fit.rate(), 0.0);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn default_window_is_last_decade_above_floor() {
        let t = log_time_grid(1e-2, 1e3, 200);
        let v: Vec<f64> = t.iter().map(|t| (-0.05 * t).exp()).collect();
        let w = default_tail_window(&t, &v).unwrap();
        let cut = t.iter().zip(&v).rev().find(|(_, v)| **v > 1e-10).unwrap().0;
        assert_eq!(w.end, *cut);
        assert!((w.start - cut / 10.0).abs() < 1e-12);
        let fit = fit_exponential_tail(&t, &v, None).unwrap();
        assert!((fit.rate() - 0.05).abs() < 1e-10);
    }

    #[test]
    fn default_window_skips_an_early_zero_crossing() {
        let t = log_time_grid(1e-1, 1e3, 120);
        let v: Vec<f64> = t
            .iter()
            .map(|&t| if (4.0..7.0).contains(&t) { 0.0 } else { (-0.02 * t).exp() })
            .collect();
        let w = default_tail_window(&t, &v).unwrap();
        assert!(w.start > 7.0);
        assert_eq!(w.end, 1e3);
        // isolated flickers above the floor after the tail do not count
        let mut v2 = v.clone();
        v2.extend([0.0, 0.0, 1e-9, 0.0]);
        let mut t2 = t.clone();
        t2.extend([1e4, 2e4, 3e4, 4e4]);
        assert_eq!(default_tail_window(&t2, &v2).unwrap(), w);
    }

    #[test]
    fn rejects_bad_windows() {
        let t = linspace(1.0, 10.0, 20);
        let mut v = vec![1.0; 20];
        assert!(fit_exponential_tail(&t, &v, Some(FitWindow::new(1.0, 2.0).unwrap())).is_err());
        v[15] = 0.0;
        assert!(fit_exponential_tail(&t, &v, Some(FitWindow::new(1.0, 10.0).unwrap())).is_err());
        assert!(FitWindow::new(3.0, 3.0).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let l: Vec<f64> = (3..=9).map(f64::from).collect();
        for (c, p) in [(0.747, -3.0), (1139.2, -6.0)] {
            let y: Vec<f64> = l.iter().map(|x| c * x.powf(p)).collect();
            let fit = fit_power_law(&l, &y).unwrap();
            assert!((fit.exponent() - p).abs() < 1e-10);
            assert!((fit.prefactor() - c).abs() < 1e-10 * c);
        }
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, -3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn noisy_single_decade_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = log_time_grid(1.0, 10.0, 30);
        let y: Vec<f64> = x
            .iter()
            .map(|x| 2.0 * x.powf(-1.5) * (1.0 + rng.random_range(-0.05..=0.05)))
            .collect();
        let fit = fit_power_law(&x, &y).unwrap();
        assert!((fit.exponent() + 1.5).abs() < 0.2, "{}", fit.exponent());
    }

    #[test]
    fn scale_equivariance() {
        let t = linspace(5.0, 50.0, 40);
        let v: Vec<f64> = t.iter().map(|t| 0.7 * (-0.11 * t).exp() * (1.0 + 0.01 * (t * 1.3).sin())).collect();
        let w = Some(FitWindow::new(5.0, 50.0).unwrap());
        let base = fit_exponential_tail(&t, &v, w).unwrap();
        let pbase = fit_power_law(&t, &v).unwrap();
        for k in [1e-6, 0.3, 17.0] {
            let s: Vec<f64> = v.iter().map(|v| v * k).collect();
            let fit = fit_exponential_tail(&t, &s, w).unwrap();
            assert!((fit.rate() - base.rate()).abs() < 1e-12);
            assert!((fit.amplitude() / base.amplitude() / k - 1.0).abs() < 1e-12);
            let pfit = fit_power_law(&t, &s).unwrap();
            assert!((pfit.exponent() - pbase.exponent()).abs() < 1e-12);
            assert!((pfit.prefactor() / pbase.prefactor() / k - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn discriminator_prefers_the_generating_model() {
        let t = log_time_grid(100.0, 1000.0, 40);
        let w = Some(FitWindow::new(100.0, 1000.0).unwrap());
        let exp: Vec<f64> = t.iter().map(|t| (-0.004 * t).exp()).collect();
        let (re, rp) = subexponential_discriminator(&t, &exp, w).unwrap();
        assert!((re - 1.0).abs() < 1e-12 && rp < re);
        let pow: Vec<f64> = t.iter().map(|t| t.powf(-0.8)).collect();
        let (re, rp) = subexponential_discriminator(&t, &pow, w).unwrap();
        assert!((rp - 1.0).abs() < 1e-12 && re < rp);
    }
}
