//! Weak-form strip solver: preconditioned conjugate gradients on the
//! symmetric positive definite Galerkin operator, or a dense direct solve at
//! small sizes.
//!
//! The discrete operator is `A = B^T W P B` where B stacks the twisted
//! gradient (sqrt(mu) d_x [, gamma sqrt(mu) d_y], d_z) evaluated
//! pseudo-spectrally, W carries the Clenshaw-Curtis weights per level and P
//! multiplies pointwise by the coefficient matrix. Dirichlet data at z = 0 is
//! eliminated; the bottom condition is the natural (conormal) one and never
//! appears as a pointwise constraint.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::DimensionlessParams;
use crate::spectral::{xi_gamma_sq, FieldR, Grid};

use super::strip::{StripField, StripGrid};
use super::{DnoSolution, ElliptiCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Preconditioned conjugate gradients with the flat-strip per-mode inverse.
    Pcg,
    /// Dense Cholesky of the assembled reduced operator (desk scale only).
    Direct,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Minimum admissible water height.
    pub h_floor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Pcg,
            tol: 1e-12,
            max_iter: 800,
            h_floor: 1e-6,
        }
    }
}

/// Per-mode Cholesky factors of the flat-strip operator, deduplicated over
/// equal |xi_gamma|^2.
struct Precond {
    factor_of_mode: Vec<usize>,
    factors: Vec<Vec<f64>>,
}

pub(crate) struct StripSolver {
    nh: usize,
    nz: usize,
    nf: usize,
    dim: usize,
    sqrt_mu: f64,
    gamma: f64,
    precond: Precond,
    // scratch: du/dv on collocation levels, gradients and fluxes on the fine
    // assembly levels, adjoint accumulators back on collocation levels
    du: Vec<f64>,
    dv: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    gz: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fz: Vec<f64>,
    adj: Vec<f64>,
    tmp_level: Vec<f64>,
    spec: Vec<Complex64>,
    spec_levels: Vec<Complex64>,
    mode_rhs: Vec<Complex64>,
}

impl StripSolver {
    pub fn new(
        grid: &Grid,
        strip: &StripGrid,
        params: &DimensionlessParams,
        _opts: &SolveOptions,
    ) -> Result<StripSolver> {
        let nh = grid.size();
        let nz = strip.nz();
        let nf = strip.nf();
        let precond = build_precond(grid, strip, params)?;
        let dim2 = grid.dim() == 2;
        Ok(StripSolver {
            nh,
            nz,
            nf,
            dim: grid.dim(),
            sqrt_mu: params.mu.sqrt(),
            gamma: params.gamma,
            precond,
            du: vec![0.0; nh * nz],
            dv: if dim2 { vec![0.0; nh * nz] } else { Vec::new() },
            gx: vec![0.0; nh * nf],
            gy: if dim2 { vec![0.0; nh * nf] } else { Vec::new() },
            gz: vec![0.0; nh * nf],
            fx: vec![0.0; nh * nf],
            fy: if dim2 { vec![0.0; nh * nf] } else { Vec::new() },
            fz: vec![0.0; nh * nf],
            adj: vec![0.0; nh * nz],
            tmp_level: vec![0.0; nh],
            spec: vec![Complex64::default(); nh],
            spec_levels: vec![Complex64::default(); nh * (nz - 1)],
            mode_rhs: vec![Complex64::default(); nz - 1],
        })
    }

    fn nred(&self) -> usize {
        self.nh * (self.nz - 1)
    }

    /// out = A_full u for the full node set (top included).
    fn apply_full(
        &mut self,
        grid: &Grid,
        strip: &StripGrid,
        coeffs: &ElliptiCoeffs,
        u: &[f64],
        out: &mut [f64],
    ) {
        let nh = self.nh;
        let nz = self.nz;
        let nf = self.nf;
        // Horizontal derivatives on collocation levels, then interpolate in z
        // (exact: interpolation and d_x commute on the trial space).
        for j in 0..nz {
            let level = &u[j * nh..(j + 1) * nh];
            grid.forward_into(level, &mut self.spec);
            grid.derivative_spectrum(&mut self.spec, 0);
            grid.inverse_into(&mut self.spec, &mut self.du[j * nh..(j + 1) * nh]);
            if self.dim == 2 {
                grid.forward_into(level, &mut self.spec);
                grid.derivative_spectrum(&mut self.spec, 1);
                grid.inverse_into(&mut self.spec, &mut self.dv[j * nh..(j + 1) * nh]);
            }
        }
        strip.interp_to_fine(&self.du, nh, &mut self.gx);
        if self.dim == 2 {
            strip.interp_to_fine(&self.dv, nh, &mut self.gy);
        }
        strip.dz_to_fine(u, nh, &mut self.gz);

        // Pointwise fluxes at the fine nodes, scaled by the quadrature weight.
        let w = strip.weights_fine();
        let sm = self.sqrt_mu;
        let gsm = self.gamma * self.sqrt_mu;
        for j in 0..nf {
            let wj = w[j];
            for p in 0..nh {
                let idx = j * nh + p;
                let gxv = sm * self.gx[idx];
                let gzv = self.gz[idx];
                let h = coeffs.h[p];
                if self.dim == 1 {
                    self.fx[idx] = wj * (h * gxv + coeffs.pxz_fine[idx] * gzv);
                    self.fz[idx] = wj * (coeffs.pxz_fine[idx] * gxv + coeffs.pzz_fine[idx] * gzv);
                } else {
                    let gyv = gsm * self.gy[idx];
                    let pyz = coeffs.pyz_fine.as_ref().expect("d=2")[idx];
                    self.fx[idx] = wj * (h * gxv + coeffs.pxz_fine[idx] * gzv);
                    self.fy[idx] = wj * (h * gyv + pyz * gzv);
                    self.fz[idx] = wj
                        * (coeffs.pxz_fine[idx] * gxv + pyz * gyv + coeffs.pzz_fine[idx] * gzv);
                }
            }
        }

        // Adjoint: out = (J D)^T fz - sqrt(mu) d_x (J^T fx) [- gamma sqrt(mu) d_y (J^T fy)]
        strip.dz_fine_transpose(&self.fz, nh, out);
        strip.interp_transpose(&self.fx, nh, &mut self.adj);
        for j in 0..nz {
            let level = &self.adj[j * nh..(j + 1) * nh];
            grid.forward_into(level, &mut self.spec);
            grid.derivative_spectrum(&mut self.spec, 0);
            grid.inverse_into(&mut self.spec, &mut self.tmp_level);
            let dst = &mut out[j * nh..(j + 1) * nh];
            for (o, t) in dst.iter_mut().zip(&self.tmp_level) {
                *o -= sm * t;
            }
        }
        if self.dim == 2 {
            strip.interp_transpose(&self.fy, nh, &mut self.adj);
            for j in 0..nz {
                let level = &self.adj[j * nh..(j + 1) * nh];
                grid.forward_into(level, &mut self.spec);
                grid.derivative_spectrum(&mut self.spec, 1);
                grid.inverse_into(&mut self.spec, &mut self.tmp_level);
                let dst = &mut out[j * nh..(j + 1) * nh];
                for (o, t) in dst.iter_mut().zip(&self.tmp_level) {
                    *o -= gsm * t;
                }
            }
        }
    }

    /// out = A_rr u_red (reduced operator on levels 1..nz-1), via two embeds.
    fn apply_reduced(
        &mut self,
        grid: &Grid,
        strip: &StripGrid,
        coeffs: &ElliptiCoeffs,
        u_red: &[f64],
        full_in: &mut [f64],
        full_out: &mut [f64],
        out: &mut [f64],
    ) {
        let nh = self.nh;
        full_in[..nh].fill(0.0);
        full_in[nh..].copy_from_slice(u_red);
        self.apply_full(grid, strip, coeffs, full_in, full_out);
        out.copy_from_slice(&full_out[nh..]);
    }

    /// z = M^{-1} r with the flat-strip per-mode factorization.
    fn apply_precond(&mut self, grid: &Grid, r: &[f64], z: &mut [f64]) {
        let nh = self.nh;
        let nlev = self.nz - 1;
        for j in 0..nlev {
            let level = &r[j * nh..(j + 1) * nh];
            grid.forward_into(level, &mut self.spec);
            self.spec_levels[j * nh..(j + 1) * nh].copy_from_slice(&self.spec);
        }
        for p in 0..nh {
            for j in 0..nlev {
                self.mode_rhs[j] = self.spec_levels[j * nh + p];
            }
            let f = &self.precond.factors[self.precond.factor_of_mode[p]];
            chol_solve_complex(f, nlev, &mut self.mode_rhs);
            for j in 0..nlev {
                self.spec_levels[j * nh + p] = self.mode_rhs[j];
            }
        }
        for j in 0..nlev {
            self.spec
                .copy_from_slice(&self.spec_levels[j * nh..(j + 1) * nh]);
            grid.inverse_into(&mut self.spec, &mut z[j * nh..(j + 1) * nh]);
        }
    }

    pub fn solve(
        &mut self,
        grid: &Grid,
        strip: &StripGrid,
        coeffs: &ElliptiCoeffs,
        psi: &FieldR,
        guess: Option<&StripField>,
        opts: &SolveOptions,
    ) -> Result<DnoSolution> {
        let nh = self.nh;
        let nz = self.nz;
        let nred = self.nred();

        let mut full_in = vec![0.0; nh * nz];
        let mut full_out = vec![0.0; nh * nz];

        // RHS: b = -(A psi_ext)|_red with psi_ext = psi at the top, 0 below.
        full_in[..nh].copy_from_slice(&psi.data);
        full_in[nh..].fill(0.0);
        self.apply_full(grid, strip, coeffs, &full_in, &mut full_out);
        let mut b = vec![0.0; nred];
        for (bi, &v) in b.iter_mut().zip(&full_out[nh..]) {
            *bi = -v;
        }
        let bnorm = norm(&b);

        let mut x = vec![0.0; nred];
        if let Some(g) = guess {
            if g.data.len() == nh * nz {
                x.copy_from_slice(&g.data[nh..]);
            }
        }

        let (iterations, residual) = if bnorm == 0.0 {
            x.fill(0.0);
            (0, 0.0)
        } else {
            match opts.method {
                SolveMethod::Pcg => {
                    self.pcg(grid, strip, coeffs, &b, &mut x, &mut full_in, &mut full_out, opts)?
                }
                SolveMethod::Direct => {
                    self.direct(grid, strip, coeffs, &b, &mut x, &mut full_in, &mut full_out)?
                }
            }
        };

        // Assemble the full potential and extract the weak top flux.
        full_in[..nh].copy_from_slice(&psi.data);
        full_in[nh..].copy_from_slice(&x);
        let phi = StripField {
            data: full_in.clone(),
            nh,
            nz,
        };
        self.apply_full(grid, strip, coeffs, &full_in, &mut full_out);
        let g = FieldR::from_vec(full_out[..nh].to_vec());

        Ok(DnoSolution {
            phi,
            g,
            iterations,
            residual,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn pcg(
        &mut self,
        grid: &Grid,
        strip: &StripGrid,
        coeffs: &ElliptiCoeffs,
        b: &[f64],
        x: &mut [f64],
        full_in: &mut [f64],
        full_out: &mut [f64],
        opts: &SolveOptions,
    ) -> Result<(usize, f64)> {
        let nred = b.len();
        let bnorm = norm(b);
        let mut r = vec![0.0; nred];
        let mut z = vec![0.0; nred];
        let mut p = vec![0.0; nred];
        let mut q = vec![0.0; nred];

        self.apply_reduced(grid, strip, coeffs, x, full_in, full_out, &mut r);
        for i in 0..nred {
            r[i] = b[i] - r[i];
        }
        let mut rnorm = norm(&r);
        if rnorm <= opts.tol * bnorm {
            return Ok((0, rnorm / bnorm));
        }
        self.apply_precond(grid, &r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);

        for it in 1..=opts.max_iter {
            self.apply_reduced(grid, strip, coeffs, &p, full_in, full_out, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::SolverFailure {
                    residual: rnorm / bnorm,
                    iterations: it,
                    target: opts.tol,
                });
            }
            let alpha = rz / pq;
            for i in 0..nred {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            rnorm = norm(&r);
            if rnorm <= opts.tol * bnorm {
                return Ok((it, rnorm / bnorm));
            }
            self.apply_precond(grid, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..nred {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolverFailure {
            residual: rnorm / bnorm,
            iterations: opts.max_iter,
            target: opts.tol,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn direct(
        &mut self,
        grid: &Grid,
        strip: &StripGrid,
        coeffs: &ElliptiCoeffs,
        b: &[f64],
        x: &mut [f64],
        full_in: &mut [f64],
        full_out: &mut [f64],
    ) -> Result<(usize, f64)> {
        let nred = b.len();
        let mut a = vec![0.0; nred * nred];
        let mut e = vec![0.0; nred];
        let mut col = vec![0.0; nred];
        for jcol in 0..nred {
            e.fill(0.0);
            e[jcol] = 1.0;
            self.apply_reduced(grid, strip, coeffs, &e, full_in, full_out, &mut col);
            for (i, &v) in col.iter().enumerate() {
                a[i * nred + jcol] = v;
            }
        }
        cholesky_in_place(&mut a, nred)?;
        x.copy_from_slice(b);
        chol_solve(&a, nred, x);
        // Report the true residual of the direct solve.
        self.apply_reduced(grid, strip, coeffs, x, full_in, full_out, &mut col);
        let mut rnorm2 = 0.0;
        for i in 0..nred {
            let d = b[i] - col[i];
            rnorm2 += d * d;
        }
        Ok((1, rnorm2.sqrt() / norm(b)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn build_precond(
    grid: &Grid,
    strip: &StripGrid,
    params: &DimensionlessParams,
) -> Result<Precond> {
    let nh = grid.size();
    let nz = strip.nz();
    let nlev = nz - 1;
    let mu = params.mu;

    // Deduplicate modes by |xi_gamma|^2.
    let mut keys: Vec<u64> = Vec::new();
    let mut factor_of_mode = vec![0usize; nh];
    for p in 0..nh {
        let (kx, ky) = grid.wavenumber(p);
        let xg2 = xi_gamma_sq(kx, ky, params.gamma);
        let bits = xg2.to_bits();
        let pos = match keys.iter().position(|&k| k == bits) {
            Some(pos) => pos,
            None => {
                keys.push(bits);
                keys.len() - 1
            }
        };
        factor_of_mode[p] = pos;
    }

    let mut factors = Vec::with_capacity(keys.len());
    for &bits in &keys {
        let xg2 = f64::from_bits(bits);
        // A0[m,j] over levels 1..nz-1:
        //   mu*xg2*w_m delta_{mj} + sum_l w_l Dz[l,m] Dz[l,j]
        let mut a = vec![0.0; nlev * nlev];
        for m in 1..nz {
            for j in 1..nz {
                let mut v = 0.0;
                for l in 0..nz {
                    v += w[l] * d[l * nz + m] * d[l * nz + j];
                }
                if m == j {
                    v += mu * xg2 * w[m];
                }
                a[(m - 1) * nlev + (j - 1)] = v;
            }
        }
        cholesky_in_place(&mut a, nlev)?;
        factors.push(a);
    }

    Ok(Precond {
        factor_of_mode,
        factors,
    })
}

/// In-place dense Cholesky (lower triangle), failing on non-positive pivots.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NumericDomain(format!(
                        "Cholesky pivot {s:.3e} <= 0 at row {i}; operator not positive definite"
                    )));
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn chol_solve_complex(l: &[f64], n: usize, b: &mut [Complex64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        // A = M^T M + I is SPD.
        let n = 5;
        let m: Vec<f64> = (0..n * n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += m[k * n + i] * m[k * n + j];
                }
                a[i * n + j] = s;
            }
        }
        let a0 = a.clone();
        cholesky_in_place(&mut a, n).unwrap();
        let xstar: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a0[i * n + j] * xstar[j];
            }
        }
        chol_solve(&a, n, &mut b);
        for i in 0..n {
            assert!((b[i] - xstar[i]).abs() < 1e-12);
        }
    }
}
