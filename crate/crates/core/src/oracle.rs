//! Slow reference implementations used to cross-check the linear recursions.

use crate::error::{check_level, Error, Result};
use crate::variation::VariationKind;

/// Longest path the exhaustive oracle accepts.
pub const EXHAUSTIVE_LIMIT: usize = 14;

fn gain(values: &[f64], t: usize, s: usize, c: f64, kind: VariationKind) -> f64 {
    let d = values[s] - values[t];
    match kind {
        VariationKind::Tv => d.abs() - c,
        VariationKind::Utv => d - c,
        VariationKind::Dtv => -d - c,
    }
}

/// O(n²) dynamic program over the last pair's start index.
pub fn quadratic_oracle(values: &[f64], c: f64, kind: VariationKind) -> Result<f64> {
    check_level(c)?;
    let n = values.len();
    let mut f = vec![0.0f64; n];
    for i in 1..n {
        let mut best = f[i - 1];
        for (j, fj) in f[..i].iter().enumerate() {
            best = best.max(fj + gain(values, j, i, c, kind));
        }
        f[i] = best;
    }
    Ok(f.last().copied().unwrap_or(0.0))
}

/// Literal supremum over every index subset.
///
/// For the one-sided kinds a subset of even size, sorted, is read as
/// `t_1 < s_1 < t_2 < s_2 < ...`; for the two-sided kind a subset is a chain
/// `t_1 < t_2 < ... < t_n` scored on consecutive differences.
pub fn exhaustive_oracle(values: &[f64], c: f64, kind: VariationKind) -> Result<f64> {
    check_level(c)?;
    let n = values.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLong {
            len: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut best = 0.0f64;
    let mut idx = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << n) {
        let bits = mask.count_ones() as usize;
        if bits < 2 {
            continue;
        }
        idx.clear();
        idx.extend((0..n).filter(|&i| mask & (1 << i) != 0));
        let total: f64 = match kind {
            VariationKind::Tv => idx
                .windows(2)
                .map(|w| gain(values, w[0], w[1], c, kind).max(0.0))
                .sum(),
            _ => {
                if bits % 2 == 1 {
                    continue;
                }
                idx.chunks(2)
                    .map(|p| gain(values, p[0], p[1], c, kind).max(0.0))
                    .sum()
            }
        };
        best = best.max(total);
    }
    Ok(best)
}
