//! 2-D dual-tree complex wavelet transform with periodic extension.
//!
//! Four separable tree combinations (row tree x column tree) run in
//! parallel; their twelve real highpass bands per level mix unitarily into
//! six complex orientations. Every 1-D step is an orthonormal transform, so
//! with the global 1/2 output scaling the whole decomposition is an exact
//! tight frame: energy is conserved and the adjoint is the inverse.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use super::filters::{FilterBank, TreeFilters};

/// Six complex orientation subbands of one decomposition level.
#[derive(Debug, Clone)]
pub struct DtcwtLevel {
    pub orientations: [Array2<Complex64>; 6],
}

/// Full decomposition: per-level orientations plus the four tree-combination
/// lowpass planes (row-tree/column-tree order: aa, ab, ba, bb).
#[derive(Debug, Clone)]
pub struct DtcwtPyramid {
    pub levels: Vec<DtcwtLevel>,
    pub lowpass: [Array2<f64>; 4],
    pub input_shape: (usize, usize),
}

impl DtcwtPyramid {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn energy(&self) -> f64 {
        let sub: f64 = self
            .levels
            .iter()
            .flat_map(|l| l.orientations.iter())
            .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        let low: f64 = self.lowpass.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>()).sum();
        sub + low
    }
}

/// Analysis along one axis: `y[k] = sum_n h[n] x[(2k + n + off) mod N]`,
/// halving that axis. `axis` 0 filters down columns, 1 along rows.
fn analyze_axis(x: &Array2<f64>, h: &[f64], off: usize, axis: usize) -> Array2<f64> {
    let (rows, cols) = x.dim();
    let n = if axis == 0 { rows } else { cols };
    let half = n / 2;
    let mut out = if axis == 0 {
        Array2::zeros((half, cols))
    } else {
        Array2::zeros((rows, half))
    };
    for other in 0..(if axis == 0 { cols } else { rows }) {
        for k in 0..half {
            let mut acc = 0.0;
            for (i, &hv) in h.iter().enumerate() {
                let src = (2 * k + i + off) % n;
                acc += hv
                    * if axis == 0 {
                        x[(src, other)]
                    } else {
                        x[(other, src)]
                    };
            }
            if axis == 0 {
                out[(k, other)] = acc;
            } else {
                out[(other, k)] = acc;
            }
        }
    }
    out
}

/// Adjoint of `analyze_axis`: scatter `y` back through the filter taps.
fn synthesize_axis_into(acc: &mut Array2<f64>, y: &Array2<f64>, h: &[f64], off: usize, axis: usize) {
    let (rows, cols) = acc.dim();
    let n = if axis == 0 { rows } else { cols };
    let half = n / 2;
    for other in 0..(if axis == 0 { cols } else { rows }) {
        for k in 0..half {
            let v = if axis == 0 { y[(k, other)] } else { y[(other, k)] };
            if v == 0.0 {
                continue;
            }
            for (i, &hv) in h.iter().enumerate() {
                let dst = (2 * k + i + off) % n;
                if axis == 0 {
                    acc[(dst, other)] += hv * v;
                } else {
                    acc[(other, dst)] += hv * v;
                }
            }
        }
    }
}

fn tree<'a>(bank: &'a FilterBank, level: usize, b_tree: bool) -> &'a TreeFilters {
    match (level, b_tree) {
        (0, false) => &bank.first_a,
        (0, true) => &bank.first_b,
        (_, false) => &bank.later_a,
        (_, true) => &bank.later_b,
    }
}

/// One separable 2-D analysis step for a (row-tree, column-tree) combo.
/// Returns (LL, LH, HL, HH); first letter = slow-time (axis 0) band.
fn analyze_combo(
    x: &Array2<f64>,
    bank: &FilterBank,
    level: usize,
    row_b: bool,
    col_b: bool,
) -> [Array2<f64>; 4] {
    let tr = tree(bank, level, row_b);
    let tc = tree(bank, level, col_b);
    let lo_r = analyze_axis(x, &tr.lowpass, tr.offset, 0);
    let hi_r = analyze_axis(x, &tr.highpass, tr.offset, 0);
    let ll = analyze_axis(&lo_r, &tc.lowpass, tc.offset, 1);
    let lh = analyze_axis(&lo_r, &tc.highpass, tc.offset, 1);
    let hl = analyze_axis(&hi_r, &tc.lowpass, tc.offset, 1);
    let hh = analyze_axis(&hi_r, &tc.highpass, tc.offset, 1);
    [ll, lh, hl, hh]
}

fn synthesize_combo(
    bands: &[Array2<f64>; 4],
    shape: (usize, usize),
    bank: &FilterBank,
    level: usize,
    row_b: bool,
    col_b: bool,
) -> Array2<f64> {
    let tr = tree(bank, level, row_b);
    let tc = tree(bank, level, col_b);
    let half_rows = shape.0 / 2;
    let mut lo_r = Array2::zeros((half_rows, shape.1));
    let mut hi_r = Array2::zeros((half_rows, shape.1));
    synthesize_axis_into(&mut lo_r, &bands[0], &tc.lowpass, tc.offset, 1);
    synthesize_axis_into(&mut lo_r, &bands[1], &tc.highpass, tc.offset, 1);
    synthesize_axis_into(&mut hi_r, &bands[2], &tc.lowpass, tc.offset, 1);
    synthesize_axis_into(&mut hi_r, &bands[3], &tc.highpass, tc.offset, 1);
    let mut out = Array2::zeros(shape);
    synthesize_axis_into(&mut out, &lo_r, &tr.lowpass, tr.offset, 0);
    synthesize_axis_into(&mut out, &hi_r, &tr.highpass, tr.offset, 0);
    out
}

const COMBOS: [(bool, bool); 4] = [(false, false), (false, true), (true, false), (true, true)];

/// Mix four real co-located bands (aa, ab, ba, bb) into two complex
/// orientation values; unitary, so energy is preserved.
fn mix(aa: f64, ab: f64, ba: f64, bb: f64) -> (Complex64, Complex64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (
        Complex64::new((aa - bb) * s, (ab + ba) * s),
        Complex64::new((aa + bb) * s, (ba - ab) * s),
    )
}

/// Adjoint of `mix`.
fn unmix(z1: Complex64, z2: Complex64) -> (f64, f64, f64, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (
        (z1.re + z2.re) * s,
        (z1.im - z2.im) * s,
        (z1.im + z2.im) * s,
        (z2.re - z1.re) * s,
    )
}

/// Forward transform of one real plane over `levels` scales.
pub fn dtcwt_forward(plane: &Array2<f64>, bank: &FilterBank, levels: usize) -> Result<DtcwtPyramid> {
    let (q, l) = plane.dim();
    if levels == 0 {
        return Err(CoreError::parameter("need at least one decomposition level"));
    }
    let div = 1usize << levels;
    if q % div != 0 || l % div != 0 || q / div == 0 || l / div == 0 {
        return Err(CoreError::dimension(format!(
            "shape {q}x{l} is not divisible into {levels} halvings"
        )));
    }
    let mut lows: [Array2<f64>; 4] = [plane.clone(), plane.clone(), plane.clone(), plane.clone()];
    let mut out_levels = Vec::with_capacity(levels);
    for lev in 0..levels {
        // Per combo: [LL, LH, HL, HH].
        let mut bands: Vec<[Array2<f64>; 4]> = Vec::with_capacity(4);
        for (ci, &(rb, cb)) in COMBOS.iter().enumerate() {
            bands.push(analyze_combo(&lows[ci], bank, lev, rb, cb));
        }
        let dim = bands[0][0].dim();
        let mut orientations: Vec<Array2<Complex64>> =
            (0..6).map(|_| Array2::zeros(dim)).collect();
        for (band_idx, pair) in [(1usize, (0usize, 1usize)), (2, (2, 3)), (3, (4, 5))] {
            for r in 0..dim.0 {
                for c in 0..dim.1 {
                    let (z1, z2) = mix(
                        bands[0][band_idx][(r, c)],
                        bands[1][band_idx][(r, c)],
                        bands[2][band_idx][(r, c)],
                        bands[3][band_idx][(r, c)],
                    );
                    orientations[pair.0][(r, c)] = z1 * 0.5;
                    orientations[pair.1][(r, c)] = z2 * 0.5;
                }
            }
        }
        let mut it = bands.into_iter();
        lows = [
            it.next().unwrap()[0].clone(),
            it.next().unwrap()[0].clone(),
            it.next().unwrap()[0].clone(),
            it.next().unwrap()[0].clone(),
        ];
        let mut ors = orientations.into_iter();
        out_levels.push(DtcwtLevel {
            orientations: [
                ors.next().unwrap(),
                ors.next().unwrap(),
                ors.next().unwrap(),
                ors.next().unwrap(),
                ors.next().unwrap(),
                ors.next().unwrap(),
            ],
        });
    }
    for low in lows.iter_mut() {
        low.mapv_inplace(|v| v * 0.5);
    }
    Ok(DtcwtPyramid { levels: out_levels, lowpass: lows, input_shape: (q, l) })
}

/// Inverse transform (exact adjoint of the tight frame).
pub fn dtcwt_inverse(pyramid: &DtcwtPyramid, bank: &FilterBank) -> Result<Array2<f64>> {
    let levels = pyramid.num_levels();
    if levels == 0 {
        return Err(CoreError::dimension("empty pyramid"));
    }
    let (q, l) = pyramid.input_shape;
    let mut lows: Vec<Array2<f64>> = pyramid.lowpass.to_vec();
    for lev in (0..levels).rev() {
        let level = &pyramid.levels[lev];
        let dim = level.orientations[0].dim();
        for low in lows.iter() {
            if low.dim() != dim {
                return Err(CoreError::dimension("pyramid level shapes are inconsistent"));
            }
        }
        let shape = (q >> lev, l >> lev);
        let mut next: Vec<Array2<f64>> = Vec::with_capacity(4);
        for (ci, &(rb, cb)) in COMBOS.iter().enumerate() {
            let mut bands = [
                lows[ci].clone(),
                Array2::zeros(dim),
                Array2::zeros(dim),
                Array2::zeros(dim),
            ];
            for (band_idx, pair) in [(1usize, (0usize, 1usize)), (2, (2, 3)), (3, (4, 5))] {
                for r in 0..dim.0 {
                    for c in 0..dim.1 {
                        let (aa, ab, ba, bb) = unmix(
                            level.orientations[pair.0][(r, c)],
                            level.orientations[pair.1][(r, c)],
                        );
                        bands[band_idx][(r, c)] = match ci {
                            0 => aa,
                            1 => ab,
                            2 => ba,
                            _ => bb,
                        };
                    }
                }
            }
            next.push(synthesize_combo(&bands, shape, bank, lev, rb, cb));
        }
        lows = next;
    }
    let mut out = Array2::zeros((q, l));
    for plane in lows {
        out += &plane;
    }
    out.mapv_inplace(|v| v * 0.5);
    Ok(out)
}
