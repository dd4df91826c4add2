//! Block tridiagonal solves, optionally with periodic corner blocks.
//!
//! Row `j` reads `lower[j]·x[j-1] + diag[j]·x[j] + upper[j]·x[j+1] = r[j]`.
//! Without wrap-around, `lower[0]` and `upper[n-1]` are ignored; with it, they
//! couple to `x[n-1]` and `x[0]` and the last block is eliminated through a
//! Schur complement.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct BlockTridiagonal {
    pub block: usize,
    pub lower: Vec<DMatrix<f64>>,
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    pub cyclic: bool,
}

impl BlockTridiagonal {
    pub fn zeros(blocks: usize, block: usize, cyclic: bool) -> Self {
        let z = DMatrix::zeros(block, block);
        Self {
            block,
            lower: vec![z.clone(); blocks],
            diag: vec![z.clone(); blocks],
            upper: vec![z; blocks],
            cyclic,
        }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    /// Solves for `x` given `rhs` laid out block after block.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.blocks();
        let m = self.block;
        assert_eq!(rhs.len(), n * m);
        let rhs_block = |j: usize| DMatrix::from_column_slice(m, 1, &rhs[j * m..(j + 1) * m]);

        if !self.cyclic || n < 3 {
            let r: Vec<DMatrix<f64>> = (0..n).map(rhs_block).collect();
            let (mut diag, mut upper, mut lower) = (self.diag.clone(), self.upper.clone(), self.lower.clone());
            if self.cyclic && n == 1 {
                diag[0] += &self.lower[0] + &self.upper[0];
            } else if self.cyclic && n == 2 {
                upper[0] += &self.lower[0];
                lower[1] += &self.upper[1];
            }
            let x = thomas(&lower, &diag, &upper, r)?;
            return Ok(flatten(&x));
        }

        // Inner system over blocks 0..n-2 with the coupling to x[n-1] moved to the
        // right-hand side as extra columns.
        let k = n - 1;
        let mut r = Vec::with_capacity(k);
        for j in 0..k {
            let mut cols = DMatrix::zeros(m, m + 1);
            cols.column_mut(0).copy_from(&rhs_block(j).column(0));
            if j == 0 {
                cols.columns_mut(1, m).copy_from(&self.lower[0]);
            }
            if j == k - 1 {
                let mut e = cols.columns(1, m).clone_owned();
                e += &self.upper[k - 1];
                cols.columns_mut(1, m).copy_from(&e);
            }
            r.push(cols);
        }
        let y = thomas(&self.lower[..k], &self.diag[..k], &self.upper[..k], r)?;

        // last row: lower[n-1]·x[n-2] + diag[n-1]·x[n-1] + upper[n-1]·x[0] = r[n-1]
        let y0 = &y[0];
        let yk = &y[k - 1];
        let schur = &self.diag[k] - &self.upper[k] * y0.columns(1, m) - &self.lower[k] * yk.columns(1, m);
        let rz = rhs_block(k) - &self.upper[k] * y0.columns(0, 1) - &self.lower[k] * yk.columns(0, 1);
        let z = schur.lu().solve(&rz).ok_or(Error::Singular)?;

        let mut x: Vec<DMatrix<f64>> = y
            .iter()
            .map(|yj| yj.columns(0, 1) - yj.columns(1, m) * &z)
            .collect();
        x.push(z);
        Ok(flatten(&x))
    }
}

fn flatten(x: &[DMatrix<f64>]) -> Vec<f64> {
    x.iter().flat_map(|b| b.iter().copied()).collect()
}

// Block Thomas algorithm; right-hand sides may carry several columns.
fn thomas(
    lower: &[DMatrix<f64>],
    diag: &[DMatrix<f64>],
    upper: &[DMatrix<f64>],
    mut r: Vec<DMatrix<f64>>,
) -> Result<Vec<DMatrix<f64>>> {
    let n = diag.len();
    // modified upper blocks D'^{-1} C
    let mut c_mod: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = diag[j].clone();
        if j > 0 {
            d -= &lower[j] * &c_mod[j - 1];
            let correction = &lower[j] * &r[j - 1];
            r[j] -= correction;
        }
        let lu = d.lu();
        let cj = if j + 1 < n {
            lu.solve(&upper[j]).ok_or(Error::Singular)?
        } else {
            DMatrix::zeros(0, 0)
        };
        r[j] = lu.solve(&r[j]).ok_or(Error::Singular)?;
        c_mod.push(cj);
    }
    for j in (0..n.saturating_sub(1)).rev() {
        let correction = &c_mod[j] * &r[j + 1];
        r[j] -= correction;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(sys: &BlockTridiagonal) -> DMatrix<f64> {
        let n = sys.blocks();
        let m = sys.block;
        let mut a = DMatrix::zeros(n * m, n * m);
        for j in 0..n {
            a.view_mut((j * m, j * m), (m, m)).copy_from(&sys.diag[j]);
            if j > 0 || sys.cyclic {
                let c = (j + n - 1) % n;
                let mut v = a.view_mut((j * m, c * m), (m, m));
                v += &sys.lower[j];
            }
            if j + 1 < n || sys.cyclic {
                let c = (j + 1) % n;
                let mut v = a.view_mut((j * m, c * m), (m, m));
                v += &sys.upper[j];
            }
        }
        a
    }

    fn filled(n: usize, m: usize, cyclic: bool) -> BlockTridiagonal {
        let mut sys = BlockTridiagonal::zeros(n, m, cyclic);
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for j in 0..n {
            for a in sys.lower[j].iter_mut() {
                *a = next();
            }
            for a in sys.upper[j].iter_mut() {
                *a = next();
            }
            for a in sys.diag[j].iter_mut() {
                *a = next();
            }
            for i in 0..m {
                sys.diag[j][(i, i)] += 4.0;
            }
        }
        sys
    }

    #[test]
    fn matches_dense_solve() {
        for (n, m, cyclic) in [(5, 3, false), (5, 3, true), (3, 6, true), (8, 1, true), (2, 3, false), (2, 3, true), (1, 2, true)] {
            let sys = filled(n, m, cyclic);
            let rhs: Vec<f64> = (0..n * m).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = sys.solve(&rhs).unwrap();
            let a = dense(&sys);
            let residual = &a * DMatrix::from_column_slice(n * m, 1, &x) - DMatrix::from_column_slice(n * m, 1, &rhs);
            assert!(residual.amax() < 1e-12, "n={n} m={m} cyclic={cyclic}: {}", residual.amax());
        }
    }
}
