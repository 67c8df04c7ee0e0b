//! Vertical discretization of the flattened strip: Chebyshev-Lobatto
//! collocation on z in [-1, 0] with Clenshaw-Curtis quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::FieldR;

/// Fixed strip grid: a horizontal periodic grid (held separately) times
/// Chebyshev-Lobatto collocation points in z.
///
/// Level 0 is the top boundary z = 0 (free surface), level nz-1 the bottom
/// z = -1.
#[derive(Debug, Clone)]
pub struct StripGrid {
    nz: usize,
    /// Collocation points, z[0] = 0 >= ... >= z[nz-1] = -1.
    z: Vec<f64>,
    /// Dense differentiation matrix d/dz, row-major nz x nz.
    dz: Vec<f64>,
    /// Clenshaw-Curtis weights for integration over [-1, 0].
    w: Vec<f64>,
    /// Refined quadrature rule used for exact Galerkin assembly: the
    /// coefficient matrix of the flattened problem is polynomial of degree 2
    /// in z, so integrands have degree <= 2 nz, one refinement level up.
    zf: Vec<f64>,
    wf: Vec<f64>,
    /// Interpolation from the nz collocation nodes to the fine nodes
    /// (row-major nf x nz).
    interp: Vec<f64>,
    /// Derivative-then-interpolate matrix (interp * dz), nf x nz.
    interp_dz: Vec<f64>,
}

impl StripGrid {
    /// Chebyshev-Lobatto collocation with `nz` points (including both
    /// endpoints).
    pub fn new(nz: usize) -> Result<StripGrid> {
        if nz < 8 {
            return Err(Error::InvalidInput(format!(
                "strip grid needs nz >= 8 collocation points, got {nz}"
            )));
        }
        let n = nz - 1;
        // Lobatto points on [1, -1], mapped to [0, -1] by z = (x - 1)/2.
        let x: Vec<f64> = (0..nz).map(|j| (PI * j as f64 / n as f64).cos()).collect();
        let z: Vec<f64> = x.iter().map(|&xi| (xi - 1.0) / 2.0).collect();

        // Trefethen's differentiation matrix on [1, -1], then chain rule
        // d/dz = 2 d/dx.
        let c = |i: usize| -> f64 {
            let base = if i == 0 || i == n { 2.0 } else { 1.0 };
            base * if i % 2 == 0 { 1.0 } else { -1.0 }
        };
        let mut d = vec![0.0; nz * nz];
        for i in 0..nz {
            let mut row_sum = 0.0;
            for j in 0..nz {
                if i != j {
                    let v = c(i) / c(j) / (x[i] - x[j]);
                    d[i * nz + j] = v;
                    row_sum += v;
                }
            }
            d[i * nz + i] = -row_sum;
        }
        for v in &mut d {
            *v *= 2.0;
        }

        let w = clenshaw_curtis(n).iter().map(|v| 0.5 * v).collect();

        // Fine rule: Lobatto Clenshaw-Curtis with 2 nz + 1 points, exact for
        // polynomials of degree 2 nz.
        let nf = 2 * nz + 1;
        let xf: Vec<f64> = (0..nf)
            .map(|j| (PI * j as f64 / (nf - 1) as f64).cos())
            .collect();
        let zf: Vec<f64> = xf.iter().map(|&xi| (xi - 1.0) / 2.0).collect();
        let wf: Vec<f64> = clenshaw_curtis(nf - 1).iter().map(|v| 0.5 * v).collect();

        // Barycentric interpolation from the nz Lobatto nodes to the fine
        // nodes. Chebyshev-Lobatto barycentric weights: (-1)^j, halved at the
        // endpoints.
        let lam: Vec<f64> = (0..nz)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == nz - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let mut interp = vec![0.0; nf * nz];
        for (i, &zi) in zf.iter().enumerate() {
            if let Some(j) = z.iter().position(|&zj| (zj - zi).abs() < 1e-14) {
                interp[i * nz + j] = 1.0;
                continue;
            }
            let mut denom = 0.0;
            for j in 0..nz {
                denom += lam[j] / (zi - z[j]);
            }
            for j in 0..nz {
                interp[i * nz + j] = lam[j] / (zi - z[j]) / denom;
            }
        }
        let mut interp_dz = vec![0.0; nf * nz];
        for i in 0..nf {
            for j in 0..nz {
                let mut s = 0.0;
                for m in 0..nz {
                    s += interp[i * nz + m] * d[m * nz + j];
                }
                interp_dz[i * nz + j] = s;
            }
        }

        Ok(StripGrid {
            nz,
            z,
            dz: d,
            w,
            zf,
            wf,
            interp,
            interp_dz,
        })
    }

    /// Number of fine quadrature nodes.
    pub fn nf(&self) -> usize {
        self.zf.len()
    }

    /// Fine quadrature nodes on [-1, 0].
    pub fn z_fine(&self) -> &[f64] {
        &self.zf
    }

    /// Fine quadrature weights.
    pub fn weights_fine(&self) -> &[f64] {
        &self.wf
    }

    /// Interpolate a level-major strip array from the nz collocation levels
    /// to the nf fine levels.
    pub fn interp_to_fine(&self, u: &[f64], nh: usize, out: &mut [f64]) {
        self.matvec_levels(&self.interp, u, nh, out);
    }

    /// d/dz evaluated directly at the fine levels.
    pub fn dz_to_fine(&self, u: &[f64], nh: usize, out: &mut [f64]) {
        self.matvec_levels(&self.interp_dz, u, nh, out);
    }

    /// Transpose of `interp_to_fine` (fine -> collocation levels).
    pub fn interp_transpose(&self, u: &[f64], nh: usize, out: &mut [f64]) {
        self.matvec_levels_transpose(&self.interp, u, nh, out);
    }

    /// Transpose of `dz_to_fine`.
    pub fn dz_fine_transpose(&self, u: &[f64], nh: usize, out: &mut [f64]) {
        self.matvec_levels_transpose(&self.interp_dz, u, nh, out);
    }

    fn matvec_levels(&self, mat: &[f64], u: &[f64], nh: usize, out: &mut [f64]) {
        let nz = self.nz;
        let nf = self.zf.len();
        debug_assert_eq!(u.len(), nz * nh);
        debug_assert_eq!(out.len(), nf * nh);
        out.fill(0.0);
        for i in 0..nf {
            let row = &mat[i * nz..(i + 1) * nz];
            let dst = &mut out[i * nh..(i + 1) * nh];
            for (m, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let src = &u[m * nh..(m + 1) * nh];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
    }

    fn matvec_levels_transpose(&self, mat: &[f64], u: &[f64], nh: usize, out: &mut [f64]) {
        let nz = self.nz;
        let nf = self.zf.len();
        debug_assert_eq!(u.len(), nf * nh);
        debug_assert_eq!(out.len(), nz * nh);
        out.fill(0.0);
        for i in 0..nf {
            let row = &mat[i * nz..(i + 1) * nz];
            let src = &u[i * nh..(i + 1) * nh];
            for (m, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let dst = &mut out[m * nh..(m + 1) * nh];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
    }

    /// Quadrature over z in [-1, 0] using the fine rule, for a fine-level
    /// strip array.
    pub fn integrate_fine(&self, u: &[f64], nh: usize) -> Vec<f64> {
        let mut out = vec![0.0; nh];
        for (l, &wl) in self.wf.iter().enumerate() {
            let src = &u[l * nh..(l + 1) * nh];
            for (o, s) in out.iter_mut().zip(src) {
                *o += wl * s;
            }
        }
        out
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn diff_matrix(&self) -> &[f64] {
        &self.dz
    }

    /// d/dz of a level-major strip array (nz blocks of nh values).
    pub fn apply_dz(&self, u: &[f64], nh: usize, out: &mut [f64]) {
        let nz = self.nz;
        debug_assert_eq!(u.len(), nz * nh);
        out.fill(0.0);
        for i in 0..nz {
            let row = &self.dz[i * nz..(i + 1) * nz];
            let dst = &mut out[i * nh..(i + 1) * nh];
            for (m, &dim) in row.iter().enumerate() {
                if dim == 0.0 {
                    continue;
                }
                let src = &u[m * nh..(m + 1) * nh];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += dim * s;
                }
            }
        }
    }

    /// Transpose of `apply_dz`.
    pub fn apply_dz_transpose(&self, u: &[f64], nh: usize, out: &mut [f64]) {
        let nz = self.nz;
        debug_assert_eq!(u.len(), nz * nh);
        out.fill(0.0);
        for m in 0..nz {
            let src = &u[m * nh..(m + 1) * nh];
            for i in 0..nz {
                let dim = self.dz[m * nz + i];
                if dim == 0.0 {
                    continue;
                }
                let dst = &mut out[i * nh..(i + 1) * nh];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += dim * s;
                }
            }
        }
    }

    /// Quadrature of a level-major strip array over z in [-1, 0], returning a
    /// horizontal field.
    pub fn integrate_z(&self, u: &[f64], nh: usize) -> Vec<f64> {
        let mut out = vec![0.0; nh];
        for (j, &wj) in self.w.iter().enumerate() {
            let src = &u[j * nh..(j + 1) * nh];
            for (o, s) in out.iter_mut().zip(src) {
                *o += wj * s;
            }
        }
        out
    }
}

/// Clenshaw-Curtis weights on [-1, 1] for N+1 Lobatto points (Trefethen).
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nz = n + 1;
    let mut w = vec![0.0; nz];
    if n == 0 {
        w[0] = 2.0;
        return w;
    }
    w[0] = if n % 2 == 0 {
        1.0 / (n * n - 1) as f64
    } else {
        1.0 / (n * n) as f64
    };
    w[n] = w[0];
    for i in 1..n {
        let theta = PI * i as f64 / n as f64;
        let mut v = 1.0;
        if n % 2 == 0 {
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4 * k * k - 1) as f64;
            }
            v -= (n as f64 * theta).cos() / (n * n - 1) as f64;
        } else {
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4 * k * k - 1) as f64;
            }
        }
        w[i] = 2.0 * v / n as f64;
    }
    w
}

/// Samples phi(X, z_j) on a strip, stored level-major: `data[j*nh + p]`.
#[derive(Debug, Clone)]
pub struct StripField {
    pub data: Vec<f64>,
    pub nh: usize,
    pub nz: usize,
}

impl StripField {
    pub fn zeros(nh: usize, nz: usize) -> StripField {
        StripField {
            data: vec![0.0; nh * nz],
            nh,
            nz,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Horizontal trace at collocation level `j`.
    pub fn level(&self, j: usize) -> FieldR {
        FieldR::from_vec(self.data[j * self.nh..(j + 1) * self.nh].to_vec())
    }

    /// Trace at the top boundary z = 0.
    pub fn top(&self) -> FieldR {
        self.level(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let s = StripGrid::new(12).unwrap();
        // int_{-1}^{0} z^k dz = (-1)^k/(k+1)
        for k in 0..10usize {
            let exact = if k % 2 == 0 { 1.0 } else { -1.0 } / (k + 1) as f64;
            let val: f64 = s
                .z()
                .iter()
                .zip(s.weights())
                .map(|(&z, &w)| w * z.powi(k as i32))
                .sum();
            assert!(
                (val - exact).abs() < 1e-13,
                "k={k}: {val} vs {exact}"
            );
        }
    }

    #[test]
    fn differentiation_matrix_on_polynomials() {
        let s = StripGrid::new(10).unwrap();
        let nz = s.nz();
        let u: Vec<f64> = s.z().iter().map(|&z| z * z * z - 2.0 * z).collect();
        let mut du = vec![0.0; nz];
        s.apply_dz(&u, 1, &mut du);
        for (j, &z) in s.z().iter().enumerate() {
            let exact = 3.0 * z * z - 2.0;
            assert!((du[j] - exact).abs() < 1e-10, "{} vs {}", du[j], exact);
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let s = StripGrid::new(9).unwrap();
        assert!((s.z()[0] - 0.0).abs() < 1e-15);
        assert!((s.z()[8] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn dz_transpose_matches() {
        let s = StripGrid::new(8).unwrap();
        let nz = s.nz();
        let u: Vec<f64> = (0..nz).map(|i| (i as f64 * 0.7).sin()).collect();
        let v: Vec<f64> = (0..nz).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut du = vec![0.0; nz];
        let mut dtv = vec![0.0; nz];
        s.apply_dz(&u, 1, &mut du);
        s.apply_dz_transpose(&v, 1, &mut dtv);
        let a: f64 = du.iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&dtv).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}
