//! Adaptive Gauss–Kronrod (7/15) quadrature.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Most subintervals kept before giving up.
const MAX_INTERVALS: usize = 4000;

struct Piece {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Integrates `f` over `[a, b]` to within `abs_tol + rel_tol * |I|`,
/// always splitting the interval with the largest error estimate.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut eval = |lo: f64, hi: f64| -> Result<Piece> {
        let (val, err) = kronrod(&mut f, lo, hi);
        if val.is_finite() && err.is_finite() {
            Ok(Piece { lo, hi, val, err })
        } else {
            Err(Error::Numeric(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )))
        }
    };
    let mut heap = BinaryHeap::new();
    heap.push(eval(a, b)?);
    loop {
        let total: NeumaierSum = heap.iter().map(|p| p.val).collect();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        let target = abs_tol + rel_tol * total.value().abs();
        if err <= target {
            return Ok(total.value());
        }
        if heap.len() >= MAX_INTERVALS {
            // accept a result limited by round-off in the integrand
            if err <= 1e3 * target {
                return Ok(total.value());
            }
            return Err(Error::Numeric(format!(
                "quadrature did not converge on [{a}, {b}] (error estimate {err:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            return Err(Error::Numeric(format!(
                "quadrature cannot split [{}, {}]",
                worst.lo, worst.hi
            )));
        }
        heap.push(eval(worst.lo, mid)?);
        heap.push(eval(mid, worst.hi)?);
    }
}
