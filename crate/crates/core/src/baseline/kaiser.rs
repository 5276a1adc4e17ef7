use super::{BaselineError, Result};

/// Zeroth-order modified Bessel function of the first kind by its power
/// series, stopped once a term drops below 1e-16 of the partial sum.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < 1e-16 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// Normalized Kaiser window of odd length `len`.
pub fn kaiser_weights(len: usize, beta: f64) -> Result<Vec<f64>> {
    if len == 0 || len % 2 == 0 {
        return Err(BaselineError::WindowLength(len));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(BaselineError::Beta(beta));
    }
    if len == 1 {
        return Ok(vec![1.0]);
    }
    let denom = bessel_i0(beta);
    let m = (len - 1) as f64;
    let mut w: Vec<f64> = (0..len)
        .map(|k| {
            let r = 2.0 * k as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect();
    // mirror so symmetry is exact regardless of rounding in r
    for k in 0..len / 2 {
        w[len - 1 - k] = w[k];
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Usual Kaiser design rule from a sidelobe attenuation in dB.
pub fn beta_from_attenuation(attenuation_db: f64) -> f64 {
    let a = attenuation_db;
    if a > 50.0 {
        0.1102 * (a - 8.7)
    } else if a >= 21.0 {
        0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaiserSmoother {
    pub window_length: usize,
    pub beta: f64,
    weights: Vec<f64>,
}

impl KaiserSmoother {
    pub fn new(window_length: usize, beta: f64) -> Result<Self> {
        Ok(Self { window_length, beta, weights: kaiser_weights(window_length, beta)? })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
