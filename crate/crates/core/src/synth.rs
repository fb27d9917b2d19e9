//! Synthetic data generators used by tests, examples and the bundled demo data.

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{LaggedDataset, TimeSeries};

fn normals(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Consecutive calendar days starting at 2000-01-01.
pub fn daily_dates(len: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    (0..len).map(|i| start + chrono::Days::new(i as u64)).collect()
}

/// Draws `(x, eps)` with independent standard normal entries.
pub fn toy_sample(len: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let z = normals(2 * len, seed);
    (z[..len].to_vec(), z[len..].to_vec())
}

/// Single-input regression `y = x + eps` with standard normal `x` and `eps`.
pub fn toy_dataset(len: usize, seed: u64) -> LaggedDataset {
    let (x, eps) = toy_sample(len, seed);
    let y: Vec<f64> = x.iter().zip(&eps).map(|(a, b)| a + b).collect();
    let raw_x = Array2::from_shape_vec((len, 1), x).unwrap();
    LaggedDataset::from_raw(daily_dates(len), raw_x, Array1::from(y), None)
        .expect("toy data is finite and non-degenerate")
}

/// Autoregression `y_t = coef * sum_{i=1..lags} y_{t-i} + noise_sd * eps_t`
/// after a burn-in of 500 steps.
pub fn linear_ar_returns(len: usize, lags: usize, coef: f64, noise_sd: f64, seed: u64) -> TimeSeries {
    let burn = 500;
    let eps = normals(len + burn, seed);
    let mut y = vec![0.0; len + burn];
    for t in 0..len + burn {
        let ar: f64 = (1..=lags.min(t)).map(|i| y[t - i]).sum();
        y[t] = coef * ar + noise_sd * eps[t];
    }
    TimeSeries::new(daily_dates(len), y[burn..].to_vec()).unwrap()
}

/// Price path `100 * exp(cumsum(r))` driven by a weakly autocorrelated return
/// process with slowly switching volatility.
pub fn synthetic_prices(len: usize, seed: u64) -> TimeSeries {
    let eps = normals(len, seed);
    let mut prices = Vec::with_capacity(len);
    let mut log_p = 100f64.ln();
    let mut prev = [0.0f64; 6];
    for (t, e) in eps.iter().enumerate() {
        let vol = if (t / 250) % 2 == 0 { 0.01 } else { 0.025 };
        let r = 0.0003 + 0.05 * prev.iter().sum::<f64>() + vol * e;
        prev.rotate_right(1);
        prev[0] = r;
        log_p += r;
        prices.push(log_p.exp());
    }
    TimeSeries::new(daily_dates(len), prices).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(toy_sample(10, 3), toy_sample(10, 3));
        assert_ne!(toy_sample(10, 3), toy_sample(10, 4));
        assert_eq!(synthetic_prices(50, 1), synthetic_prices(50, 1));
        assert!(synthetic_prices(50, 1).values().iter().all(|p| *p > 0.0));
    }

    #[test]
    fn ar_series_has_requested_length() {
        let s = linear_ar_returns(300, 6, 0.1, 1.0, 2);
        assert_eq!(s.len(), 300);
    }
}
