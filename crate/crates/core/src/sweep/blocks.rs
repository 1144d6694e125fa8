//! Row-block accumulation of the normal-equation products.
//!
//! `C_k` is split into `L` contiguous row blocks; each block's contribution
//! `C_lᵀ W_l C_l` and `C_lᵀ t_l` is computed independently (in parallel) and
//! the partial results are summed in block order, so the outcome depends on
//! `L` but never on how many threads ran the blocks.

use nalgebra::{DMatrix, DMatrixView, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// `CᵀWC` and `Cᵀt` for one core update.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProducts {
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Contiguous partition of `n` rows into `blocks` nearly equal parts.
pub fn even_partition(n: usize, blocks: usize) -> Vec<usize> {
    let blocks = blocks.clamp(1, n.max(1));
    let base = n / blocks;
    let extra = n % blocks;
    (0..blocks)
        .map(|l| base + usize::from(l < extra))
        .collect()
}

/// Computes `CᵀWC` and `Cᵀt` from `ct = Cᵀ` (`m × N`, one column per sample)
/// using the row partition `sizes` (which must sum to `N`). `weights` is the
/// diagonal of `W`; `None` means the identity.
pub fn accumulate_blocks(
    ct: &DMatrix<f64>,
    weights: Option<&[f64]>,
    target: &[f64],
    sizes: &[usize],
) -> Result<BlockProducts> {
    let n = ct.ncols();
    let m = ct.nrows();
    if sizes.iter().sum::<usize>() != n || sizes.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "block sizes {sizes:?} do not partition {n} rows"
        )));
    }
    if target.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "target/weights length does not match {n} rows"
        )));
    }
    let mut starts = Vec::with_capacity(sizes.len());
    let mut s = 0;
    for &len in sizes {
        starts.push(s);
        s += len;
    }
    let partials: Vec<BlockProducts> = starts
        .par_iter()
        .zip(sizes.par_iter())
        .map(|(&start, &len)| {
            let block = ct.columns(start, len);
            let t = DVector::from_column_slice(&target[start..start + len]);
            let rhs = block * t;
            let gram = match weights {
                None => symmetric_product(&block, &block),
                Some(w) => {
                    let mut scaled = block.clone_owned();
                    for (c, &wj) in w[start..start + len].iter().enumerate() {
                        scaled.column_mut(c).scale_mut(wj);
                    }
                    symmetric_product(&scaled.as_view(), &block)
                }
            };
            BlockProducts { gram, rhs }
        })
        .collect();
    let mut total = BlockProducts {
        gram: DMatrix::zeros(m, m),
        rhs: DVector::zeros(m),
    };
    for p in &partials {
        total.gram += &p.gram;
        total.rhs += &p.rhs;
    }
    Ok(total)
}

/// Rows per tile in [`symmetric_product`].
const TILE: usize = 32;

/// `a bᵀ` for a product known to be symmetric: only tiles on and above the
/// diagonal are multiplied, the rest is mirrored.
fn symmetric_product(a: &DMatrixView<'_, f64>, b: &DMatrixView<'_, f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let mut out = DMatrix::zeros(m, m);
    for r0 in (0..m).step_by(TILE) {
        let rl = TILE.min(m - r0);
        for c0 in (r0..m).step_by(TILE) {
            let cl = TILE.min(m - c0);
            let tile = a.rows(r0, rl) * b.rows(c0, cl).transpose();
            out.view_mut((r0, c0), (rl, cl)).copy_from(&tile);
            if c0 != r0 {
                out.view_mut((c0, r0), (cl, rl)).copy_from(&tile.transpose());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sums_to_n() {
        assert_eq!(even_partition(10, 4), vec![3, 3, 2, 2]);
        assert_eq!(even_partition(3, 8), vec![1, 1, 1]);
        assert_eq!(even_partition(0, 4), vec![0]);
    }

    #[test]
    fn single_block_equals_direct_product() {
        let c = DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64).sin());
        let ct = c.transpose();
        let y: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let p = accumulate_blocks(&ct, None, &y, &[7]).unwrap();
        assert_eq!(p.gram, &ct * &c);
        assert_eq!(p.rhs, &ct * DVector::from_vec(y.clone()));
        let ones = vec![1.0; 7];
        let pw = accumulate_blocks(&ct, Some(&ones), &y, &[7]).unwrap();
        assert_eq!(pw.gram, p.gram);
    }

    #[test]
    fn tiled_gram_matches_full_product() {
        let ct = DMatrix::from_fn(75, 40, |i, j| ((i * 7 + j * 3) as f64).cos());
        let p = accumulate_blocks(&ct, None, &[0.0; 40], &[40]).unwrap();
        let full = &ct * ct.transpose();
        assert!((&p.gram - &full).amax() <= 1e-12 * full.amax());
        assert_eq!(p.gram, p.gram.transpose());
    }

    #[test]
    fn bad_partition_is_an_error() {
        let ct = DMatrix::zeros(2, 5);
        assert!(accumulate_blocks(&ct, None, &[0.0; 5], &[2, 2]).is_err());
        assert!(accumulate_blocks(&ct, None, &[0.0; 4], &[5]).is_err());
    }
}
