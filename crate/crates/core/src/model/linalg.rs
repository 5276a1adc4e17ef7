//! Dense kernels over row-major `f64` slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out += W x` with `W` of shape `rows x cols`.
#[inline]
pub fn matvec_add(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += W^T v` with `W` of shape `rows x cols`.
#[inline]
pub fn matvec_t_add(w: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), v.len() * cols);
    for (&s, row) in v.iter().zip(w.chunks_exact(cols)) {
        if s != 0.0 {
            axpy(s, row, out);
        }
    }
}

/// `g += u v^T`.
#[inline]
pub fn outer_add(g: &mut [f64], u: &[f64], v: &[f64]) {
    debug_assert_eq!(g.len(), u.len() * v.len());
    for (&s, row) in u.iter().zip(g.chunks_exact_mut(v.len())) {
        if s != 0.0 {
            axpy(s, v, row);
        }
    }
}

/// `y += a x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_match_naive_loops() {
        let w: Vec<f64> = (0..15).map(|i| i as f64 * 0.5 - 3.0).collect();
        let x = [1.0, -2.0, 0.5, 3.0, 0.25];
        let v = [0.5, -1.0, 2.0];
        let mut out = vec![0.0; 3];
        matvec_add(&w, 5, &x, &mut out);
        for r in 0..3 {
            let want: f64 = (0..5).map(|c| w[r * 5 + c] * x[c]).sum();
            assert!((out[r] - want).abs() < 1e-12);
        }
        let mut out_t = vec![0.0; 5];
        matvec_t_add(&w, 5, &v, &mut out_t);
        for c in 0..5 {
            let want: f64 = (0..3).map(|r| w[r * 5 + c] * v[r]).sum();
            assert!((out_t[c] - want).abs() < 1e-12);
        }
        let mut g = vec![0.0; 15];
        outer_add(&mut g, &v, &x);
        for r in 0..3 {
            for c in 0..5 {
                assert_eq!(g[r * 5 + c], v[r] * x[c]);
            }
        }
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((sigmoid(-800.0)).abs() < 1e-300 + 1e-300);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
