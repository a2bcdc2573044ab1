//! Block elimination for the per-element polarization Hessian.
//!
//! With K cells the element-local Hessian of the polarization block is
//! `Hess = blkdiag(M_1..M_K) + nu0 * (1 1^T kron I2)`: every cell couples to
//! every other through the shared field term. Solves against `Hess` and its
//! Schur complement onto the flux direction reduce to 2x2 algebra via the
//! Woodbury identity, which keeps both the local Newton updates and the
//! global tangent elimination O(K) per element.

use crate::vec2::{Mat2, Vec2};

/// Factored form of `blkdiag(M_k) + nu0 * ones`. Holds `E_k = M_k^{-1}`,
/// `T = sum E_k` and the capacitance `C = (I/nu0 + T)^{-1}`.
#[derive(Clone, Debug)]
pub(crate) struct CellBlocks {
    pub e_inv: Vec<Mat2>,
    pub t_sum: Mat2,
    pub cap: Mat2,
    pub nu0: f64,
}

impl CellBlocks {
    /// Build from the per-cell diagonal blocks `M_k` (without the nu0 part).
    /// Returns `None` if any block or the capacitance is singular, which
    /// cannot happen for the strictly convex energies used here.
    pub fn build(m_blocks: &[Mat2], nu0: f64) -> Option<Self> {
        let mut e_inv = Vec::with_capacity(m_blocks.len());
        let mut t_sum = Mat2::ZERO;
        for m in m_blocks {
            let e = m.inverse()?;
            t_sum += e;
            e_inv.push(e);
        }
        let cap = (Mat2::isotropic(1.0 / nu0) + t_sum).inverse()?;
        Some(Self { e_inv, t_sum, cap, nu0 })
    }

    pub fn n_cells(&self) -> usize {
        self.e_inv.len()
    }

    /// `out = Hess^{-1} y` for stacked per-cell right-hand sides.
    pub fn apply_inverse(&self, y: &[Vec2], out: &mut [Vec2]) {
        debug_assert_eq!(y.len(), self.e_inv.len());
        debug_assert_eq!(out.len(), self.e_inv.len());
        let mut t = Vec2::ZERO;
        for (k, e) in self.e_inv.iter().enumerate() {
            out[k] = e.mul_vec(y[k]);
            t += out[k];
        }
        let corr = self.cap.mul_vec(t);
        for (k, e) in self.e_inv.iter().enumerate() {
            out[k] -= e.mul_vec(corr);
        }
    }

    /// `P = S^T Hess^{-1} S` with `S = 1 kron I2`; the 2x2 sensitivity of the
    /// total polarization to a uniform forcing of all cells.
    pub fn p_mat(&self) -> Mat2 {
        self.t_sum - self.t_sum * self.cap * self.t_sum
    }

    /// Effective tangent reluctivity after eliminating all cells:
    /// `nu_eff = nu0 (I - nu0 P)`, the Schur complement onto the flux block.
    pub fn nu_eff(&self) -> Mat2 {
        (Mat2::IDENTITY - self.p_mat() * self.nu0) * self.nu0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense reference: assemble the 2K x 2K Hessian and solve by Gaussian
    /// elimination.
    fn dense_solve(m_blocks: &[Mat2], nu0: f64, y: &[Vec2]) -> Vec<Vec2> {
        let k = m_blocks.len();
        let n = 2 * k;
        let mut a = vec![vec![0.0; n + 1]; n];
        for bi in 0..k {
            for bj in 0..k {
                let block = if bi == bj {
                    m_blocks[bi] + Mat2::isotropic(nu0)
                } else {
                    Mat2::isotropic(nu0)
                };
                a[2 * bi][2 * bj] += block.a;
                a[2 * bi][2 * bj + 1] += block.b;
                a[2 * bi + 1][2 * bj] += block.c;
                a[2 * bi + 1][2 * bj + 1] += block.d;
            }
            a[2 * bi][n] = y[bi].x;
            a[2 * bi + 1][n] = y[bi].y;
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for c in col..=n {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..k).map(|i| Vec2::new(a[2 * i][n] / a[2 * i][2 * i], a[2 * i + 1][n] / a[2 * i + 1][2 * i + 1])).collect()
    }

    #[test]
    fn woodbury_matches_dense_solve() {
        let m_blocks = [
            Mat2::new(400.0, 30.0, 30.0, 250.0),
            Mat2::new(900.0, -120.0, -120.0, 700.0),
            Mat2::new(55.0, 5.0, 5.0, 60.0),
        ];
        let nu0 = 1.0 / (4e-7 * std::f64::consts::PI);
        let blocks = CellBlocks::build(&m_blocks, nu0).unwrap();
        let y = [Vec2::new(1.0, -2.0), Vec2::new(0.3, 0.7), Vec2::new(-5.0, 0.1)];
        let mut out = [Vec2::ZERO; 3];
        blocks.apply_inverse(&y, &mut out);
        let reference = dense_solve(&m_blocks, nu0, &y);
        for k in 0..3 {
            let d = out[k] - reference[k];
            assert!(d.norm() <= 1e-10 * (1.0 + reference[k].norm()), "cell {k}: {d:?}");
        }
    }

    #[test]
    fn schur_complement_is_bounded_by_nu0() {
        let m_blocks = [Mat2::new(120.0, 10.0, 10.0, 95.0), Mat2::new(3000.0, 0.0, 0.0, 2500.0)];
        let nu0 = 1.0 / (4e-7 * std::f64::consts::PI);
        let nu_eff = CellBlocks::build(&m_blocks, nu0).unwrap().nu_eff();
        let (lo, hi) = nu_eff.sym_eigenvalues();
        assert!(lo > 0.0);
        assert!(hi <= nu0 * (1.0 + 1e-14));
    }
}
