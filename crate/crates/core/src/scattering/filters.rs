//! Wavelet filter coefficients and the dual-tree filter bank.
//!
//! Both trees use a 14-tap quarter-shift orthonormal lowpass. Published
//! 8-decimal tables are only orthonormal to ~1e-8, which caps reconstruction
//! accuracy far above what the round-trip contract demands, so construction
//! projects the taps back onto the orthonormality manifold (Gauss-Newton on
//! the even-shift autocorrelation constraints) before use.

use crate::error::{CoreError, Result};

/// 14-tap quarter-shift lowpass prototype (tree a); tree b is its reversal.
pub const QSHIFT_14: [f64; 14] = [
    0.003_253_14,
    -0.003_883_21,
    0.034_660_35,
    -0.038_872_80,
    -0.117_203_89,
    0.275_295_38,
    0.756_145_64,
    0.568_810_42,
    0.011_866_09,
    -0.106_711_80,
    0.023_825_38,
    0.017_025_22,
    -0.005_439_48,
    -0.004_556_90,
];

/// One analysis/synthesis pair plus the sampling-phase offset of its tree.
#[derive(Debug, Clone)]
pub struct TreeFilters {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
    /// Circular input offset applied before downsampling by 2.
    pub offset: usize,
}

/// Immutable filter set for the dual-tree transform.
///
/// Level 1 runs the same orthonormal pair on both trees with tree b delayed
/// by one input sample; levels >= 2 use the quarter-shift pair with tree b
/// holding the time-reversed lowpass, so the two trees stay half a sample
/// apart at every output rate.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub first_a: TreeFilters,
    pub first_b: TreeFilters,
    pub later_a: TreeFilters,
    pub later_b: TreeFilters,
}

/// Alternating flip: `h1[n] = (-1)^n h0[L-1-n]`.
fn quadrature_mirror(h0: &[f64]) -> Vec<f64> {
    let l = h0.len();
    (0..l)
        .map(|n| if n % 2 == 0 { h0[l - 1 - n] } else { -h0[l - 1 - n] })
        .collect()
}

/// Residual of the orthonormality system: even-shift autocorrelations equal
/// delta, plus a zero at the Nyquist frequency (alternating sum = 0).
fn constraint_residual(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    let shifts = l / 2;
    let mut g = Vec::with_capacity(shifts + 1);
    for k in 0..shifts {
        let mut acc = 0.0;
        for n in 0..l - 2 * k {
            acc += h[n] * h[n + 2 * k];
        }
        g.push(acc - if k == 0 { 1.0 } else { 0.0 });
    }
    let alt: f64 = h.iter().enumerate().map(|(n, &v)| if n % 2 == 0 { v } else { -v }).sum();
    g.push(alt);
    g
}

/// Solve the dense symmetric system `a x = b` by Gaussian elimination with
/// partial pivoting. Small (8x8) and well conditioned here.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(CoreError::numeric("singular constraint system"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Project taps onto the orthonormality constraints by Gauss-Newton.
pub fn orthonormalize(taps: &[f64]) -> Result<Vec<f64>> {
    let l = taps.len();
    if l % 2 != 0 {
        return Err(CoreError::config("filter length must be even"));
    }
    let mut h = taps.to_vec();
    for _ in 0..12 {
        let g = constraint_residual(&h);
        let m = g.len();
        // Jacobian rows: d g_k / d h = shifted copies of h; last row = +-1.
        let mut jac = vec![vec![0.0; l]; m];
        for (k, row) in jac.iter_mut().enumerate().take(m - 1) {
            for (idx, slot) in row.iter_mut().enumerate() {
                let mut v = 0.0;
                if idx + 2 * k < l {
                    v += h[idx + 2 * k];
                }
                if idx >= 2 * k {
                    v += h[idx - 2 * k];
                }
                *slot = v;
            }
        }
        for (idx, slot) in jac[m - 1].iter_mut().enumerate() {
            *slot = if idx % 2 == 0 { 1.0 } else { -1.0 };
        }
        // Minimum-norm step: h -= J^T (J J^T)^{-1} g.
        let mut jjt = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                jjt[i][j] = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
            }
        }
        let lam = solve_dense(jjt, g.clone())?;
        for (idx, hv) in h.iter_mut().enumerate() {
            let step: f64 = (0..m).map(|k| jac[k][idx] * lam[k]).sum();
            *hv -= step;
        }
        let worst = constraint_residual(&h).iter().map(|v| v.abs()).fold(0.0, f64::max);
        if worst < 1e-15 {
            break;
        }
    }
    let worst = constraint_residual(&h).iter().map(|v| v.abs()).fold(0.0, f64::max);
    if worst > 1e-13 {
        return Err(CoreError::numeric(format!(
            "orthonormal projection stalled at residual {worst:.3e}"
        )));
    }
    Ok(h)
}

/// Build the filter bank. The only supported tap-length combination is
/// (14, 14): the quarter-shift pair is reused at level 1 with a one-sample
/// tree offset, which keeps every level an exact orthonormal transform.
pub fn build_filterbank(first_len: usize, qshift_len: usize) -> Result<FilterBank> {
    if first_len != 14 || qshift_len != 14 {
        return Err(CoreError::config(format!(
            "unsupported filter lengths ({first_len}, {qshift_len}); only (14, 14) is shipped"
        )));
    }
    let h0a = orthonormalize(&QSHIFT_14)?;
    let mut h0b = h0a.clone();
    h0b.reverse();
    let h1a = quadrature_mirror(&h0a);
    let h1b = quadrature_mirror(&h0b);
    Ok(FilterBank {
        first_a: TreeFilters { lowpass: h0a.clone(), highpass: h1a.clone(), offset: 0 },
        first_b: TreeFilters { lowpass: h0a.clone(), highpass: h1a.clone(), offset: 1 },
        later_a: TreeFilters { lowpass: h0a, highpass: h1a, offset: 0 },
        later_b: TreeFilters { lowpass: h0b, highpass: h1b, offset: 0 },
    })
}
