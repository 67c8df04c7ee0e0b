//! Dirichlet-Neumann operator on variable surface and bathymetry.
//!
//! The harmonic potential is computed on the fixed strip z in [-1, 0] after
//! the terrain/surface-following change of variables
//! `sigma(X, z) = h(X) z + eps*zeta(X)`, `h = 1 + eps*zeta - beta*b`, which
//! turns the twisted Laplace problem into the divergence-form equation
//! `div_{mu,gamma} P(sigma) grad_{mu,gamma} phi = 0` with Dirichlet data at
//! z = 0 and a conormal (natural) condition at z = -1. The operator value is
//! extracted as the weak top-boundary flux, which keeps symmetry, positivity
//! and mean annihilation down at the solver-tolerance level.

mod scaling;
mod solve;
mod strip;

pub use scaling::{verify_operator_scalings, ScalingCase, ScalingInputs, ScalingReport};
pub use solve::{SolveMethod, SolveOptions};
pub use strip::{StripField, StripGrid};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::DimensionlessParams;
use crate::spectral::{
    apply_multiplier, div_gamma, grad_gamma, vector_norm_sq, FieldR, Grid,
};

/// Coefficient matrix field P(sigma) of the flattened elliptic problem,
/// expressed in the twisted gradient (sqrt(mu) d_x, gamma sqrt(mu) d_y, d_z).
///
/// The matrix is symmetric with zero xy block:
/// `P = [[h I_d, -sqrt(mu) s], [-sqrt(mu) s^T, (1 + mu |s|^2)/h]]` where
/// `s = grad_gamma sigma`. It is positive definite wherever h > 0.
#[derive(Debug, Clone)]
pub struct ElliptiCoeffs {
    dim: usize,
    nh: usize,
    nz: usize,
    /// Water column height h(X) (horizontal field).
    pub h: Vec<f64>,
    /// -sqrt(mu) * s_x at strip nodes (level-major).
    pxz: Vec<f64>,
    /// -sqrt(mu) * s_y at strip nodes (d = 2 only).
    pyz: Option<Vec<f64>>,
    /// (1 + mu |s|^2)/h at strip nodes.
    pzz: Vec<f64>,
    /// Same components evaluated on the fine assembly rule (P is polynomial
    /// of degree 2 in z, so Galerkin integrals are exact there).
    pub(crate) pxz_fine: Vec<f64>,
    pub(crate) pyz_fine: Option<Vec<f64>>,
    pub(crate) pzz_fine: Vec<f64>,
    pub min_h: f64,
    pub argmin_h: usize,
}

impl ElliptiCoeffs {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nh(&self) -> usize {
        self.nh
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    /// Entries of the symmetric (d+1)x(d+1) matrix at strip node (level j,
    /// horizontal p), ordered row-major upper triangle:
    /// d=1: [pxx, pxz, pzz]; d=2: [pxx, pxy, pxz, pyy, pyz, pzz].
    pub fn matrix_at(&self, j: usize, p: usize) -> Vec<f64> {
        let idx = j * self.nh + p;
        let h = self.h[p];
        match self.dim {
            1 => vec![h, self.pxz[idx], self.pzz[idx]],
            _ => vec![
                h,
                0.0,
                self.pxz[idx],
                h,
                self.pyz.as_ref().expect("d=2 coeffs")[idx],
                self.pzz[idx],
            ],
        }
    }
}

/// Assemble the coefficients of the flattened problem.
///
/// Errors with [`Error::VanishingDepth`] when `h = 1 + eps*zeta - beta*b`
/// drops below `h_floor` anywhere.
pub fn build_strip_transform(
    zeta: &FieldR,
    b: &FieldR,
    params: &DimensionlessParams,
    grid: &Grid,
    strip: &StripGrid,
    h_floor: f64,
) -> Result<ElliptiCoeffs> {
    grid.check_compatible(zeta)?;
    grid.check_compatible(b)?;
    let nh = grid.size();
    let nz = strip.nz();
    let eps = params.epsilon;
    let beta = params.beta;
    let mu = params.mu;

    let mut h = vec![0.0; nh];
    for p in 0..nh {
        h[p] = 1.0 + eps * zeta.data[p] - beta * b.data[p];
    }
    let (min_h, argmin_h) = h
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(m, am), (i, &v)| {
            if v < m {
                (v, i)
            } else {
                (m, am)
            }
        });
    if !(min_h >= h_floor) {
        return Err(Error::VanishingDepth {
            min_h,
            location: argmin_h,
            floor: h_floor,
        });
    }

    let gz = grad_gamma(zeta, params.gamma, grid)?;
    let gb = grad_gamma(b, params.gamma, grid)?;
    let sqrt_mu = mu.sqrt();

    // s = grad_gamma sigma = z (eps grad zeta - beta grad b) + eps grad zeta
    let fill = |levels: &[f64]| {
        let nl = levels.len();
        let mut pxz = vec![0.0; nh * nl];
        let mut pyz = if grid.dim() == 2 {
            Some(vec![0.0; nh * nl])
        } else {
            None
        };
        let mut pzz = vec![0.0; nh * nl];
        for (j, &zj) in levels.iter().enumerate() {
            for p in 0..nh {
                let sx = zj * (eps * gz[0].data[p] - beta * gb[0].data[p]) + eps * gz[0].data[p];
                let mut s2 = sx * sx;
                let idx = j * nh + p;
                pxz[idx] = -sqrt_mu * sx;
                if let Some(pyz) = pyz.as_mut() {
                    let sy =
                        zj * (eps * gz[1].data[p] - beta * gb[1].data[p]) + eps * gz[1].data[p];
                    s2 += sy * sy;
                    pyz[idx] = -sqrt_mu * sy;
                }
                pzz[idx] = (1.0 + mu * s2) / h[p];
            }
        }
        (pxz, pyz, pzz)
    };

    let (pxz, pyz, pzz) = fill(strip.z());
    let (pxz_fine, pyz_fine, pzz_fine) = fill(strip.z_fine());

    Ok(ElliptiCoeffs {
        dim: grid.dim(),
        nh,
        nz,
        h,
        pxz,
        pyz,
        pzz,
        pxz_fine,
        pyz_fine,
        pzz_fine,
        min_h,
        argmin_h,
    })
}

/// Result of one strip solve.
#[derive(Debug, Clone)]
pub struct DnoSolution {
    /// Flattened potential phi(X, z).
    pub phi: StripField,
    /// Weak top-flux value of G psi.
    pub g: FieldR,
    pub iterations: usize,
    pub residual: f64,
}

/// Surface traces of the velocity field.
#[derive(Debug, Clone)]
pub struct SurfaceVelocities {
    /// Vertical velocity at the surface.
    pub w: FieldR,
    /// Horizontal velocity at the surface (d components).
    pub v: Vec<FieldR>,
}

/// Reusable Dirichlet-Neumann solver bound to one grid/strip/parameter set.
///
/// The flat-strip preconditioner depends on (grid, strip, mu, gamma) only and
/// is built once; `solve` can then be called with any surface/bathymetry.
pub struct DnoSolver {
    grid: Arc<Grid>,
    strip: Arc<StripGrid>,
    params: DimensionlessParams,
    opts: SolveOptions,
    inner: solve::StripSolver,
    /// Last solution, reused as the CG warm start.
    last_phi: Option<StripField>,
    /// When true, `solve` seeds CG with the previous solution.
    pub warm_start: bool,
}

impl DnoSolver {
    pub fn new(
        grid: Arc<Grid>,
        strip: Arc<StripGrid>,
        params: DimensionlessParams,
        opts: SolveOptions,
    ) -> Result<DnoSolver> {
        params.validate()?;
        let inner = solve::StripSolver::new(&grid, &strip, &params, &opts)?;
        Ok(DnoSolver {
            grid,
            strip,
            params,
            opts,
            inner,
            last_phi: None,
            warm_start: false,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn strip(&self) -> &Arc<StripGrid> {
        &self.strip
    }

    pub fn params(&self) -> &DimensionlessParams {
        &self.params
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    /// Forget the warm-start state (call when the surface jumps discontinuously).
    pub fn reset_warm_start(&mut self) {
        self.last_phi = None;
    }

    /// Solve the flattened problem and return the potential and weak-flux DN value.
    pub fn solve(&mut self, psi: &FieldR, zeta: &FieldR, b: &FieldR) -> Result<DnoSolution> {
        self.grid.check_compatible(psi)?;
        let coeffs =
            build_strip_transform(zeta, b, &self.params, &self.grid, &self.strip, self.opts.h_floor)?;
        let guess = if self.warm_start {
            self.last_phi.as_ref()
        } else {
            None
        };
        let sol = self
            .inner
            .solve(&self.grid, &self.strip, &coeffs, psi, guess, &self.opts)?;
        if self.warm_start {
            self.last_phi = Some(sol.phi.clone());
        }
        Ok(sol)
    }

    /// G[eps zeta, beta b] psi via the strip solve.
    pub fn apply_dno(&mut self, psi: &FieldR, zeta: &FieldR, b: &FieldR) -> Result<FieldR> {
        Ok(self.solve(psi, zeta, b)?.g)
    }

    /// Analytic flat-strip operator (zeta = b = 0): multiplier
    /// sqrt(mu)|xi_gamma| tanh(sqrt(mu)|xi_gamma|).
    pub fn flat_analytic(&self, psi: &FieldR) -> Result<FieldR> {
        dno_flat_analytic(psi, &self.params, &self.grid)
    }

    /// Surface velocity traces computed from a solve at (zeta, b).
    pub fn surface_velocities(
        &mut self,
        psi: &FieldR,
        zeta: &FieldR,
        b: &FieldR,
    ) -> Result<SurfaceVelocities> {
        let g = self.apply_dno(psi, zeta, b)?;
        surface_velocities_from_g(&g, psi, zeta, &self.params, &self.grid)
    }

    /// Explicit first-order shape derivative of G with respect to the surface,
    /// `dG(h)psi = -eps G(h w) - eps mu div_gamma(h V)`.
    pub fn shape_derivative(
        &mut self,
        h: &FieldR,
        psi: &FieldR,
        zeta: &FieldR,
        b: &FieldR,
    ) -> Result<FieldR> {
        let eps = self.params.epsilon;
        let mu = self.params.mu;
        let sv = self.surface_velocities(psi, zeta, b)?;
        let hw = self.grid.padded_product(h, &sv.w);
        let g_hw = self.apply_dno(&hw, zeta, b)?;
        let hv: Vec<FieldR> = sv
            .v
            .iter()
            .map(|comp| self.grid.padded_product(h, comp))
            .collect();
        let div_hv = div_gamma(&hv, self.params.gamma, &self.grid)?;
        let mut out = g_hw.scale(-eps);
        out.axpy(-eps * mu, &div_hv);
        Ok(out)
    }

    /// Centered finite-difference derivative of zeta -> G[eps zeta, beta b]psi
    /// in the direction h; the validation path for `shape_derivative`.
    pub fn shape_derivative_fd(
        &mut self,
        h: &FieldR,
        psi: &FieldR,
        zeta: &FieldR,
        b: &FieldR,
        delta: f64,
    ) -> Result<FieldR> {
        let mut zp = zeta.clone();
        zp.axpy(delta, h);
        let mut zm = zeta.clone();
        zm.axpy(-delta, h);
        let gp = self.apply_dno(psi, &zp, b)?;
        let gm = self.apply_dno(psi, &zm, b)?;
        Ok(gp.sub(&gm).scale(0.5 / delta))
    }

    /// Centered finite-difference derivative of b -> G[eps zeta, beta b]psi in
    /// the direction k. No closed formula is used for bottom derivatives.
    pub fn bottom_derivative_fd(
        &mut self,
        k: &FieldR,
        psi: &FieldR,
        zeta: &FieldR,
        b: &FieldR,
        delta: f64,
    ) -> Result<FieldR> {
        let mut bp = b.clone();
        bp.axpy(delta, k);
        let mut bm = b.clone();
        bm.axpy(-delta, k);
        let gp = self.apply_dno(psi, zeta, &bp)?;
        let gm = self.apply_dno(psi, zeta, &bm)?;
        Ok(gp.sub(&gm).scale(0.5 / delta))
    }

    /// Second shape derivative in directions (h1, h2), by finite differences
    /// of the explicit first derivative.
    pub fn second_shape_derivative_fd(
        &mut self,
        h1: &FieldR,
        h2: &FieldR,
        psi: &FieldR,
        zeta: &FieldR,
        b: &FieldR,
        delta: f64,
    ) -> Result<FieldR> {
        let mut zp = zeta.clone();
        zp.axpy(delta, h2);
        let mut zm = zeta.clone();
        zm.axpy(-delta, h2);
        let dp = self.shape_derivative(h1, psi, &zp, b)?;
        let dm = self.shape_derivative(h1, psi, &zm, b)?;
        Ok(dp.sub(&dm).scale(0.5 / delta))
    }

    /// Chain-rule traces of the strip solution at z = 0: vertical velocity
    /// `dz(phi)/h` and horizontal velocity `grad_gamma(psi) - s dz(phi)/h`.
    /// Used to cross-check `surface_velocities`.
    pub fn trace_velocities(
        &mut self,
        psi: &FieldR,
        zeta: &FieldR,
        b: &FieldR,
    ) -> Result<SurfaceVelocities> {
        let sol = self.solve(psi, zeta, b)?;
        let nh = self.grid.size();
        let nz = self.strip.nz();
        let mut dzphi = vec![0.0; nh * nz];
        self.strip.apply_dz(&sol.phi.data, nh, &mut dzphi);
        let dz_top = &dzphi[..nh];

        let eps = self.params.epsilon;
        let gz = grad_gamma(zeta, self.params.gamma, &self.grid)?;
        let mut h = vec![0.0; nh];
        for p in 0..nh {
            h[p] = 1.0 + eps * zeta.data[p] - self.params.beta * b.data[p];
        }
        let w = FieldR::from_vec((0..nh).map(|p| dz_top[p] / h[p]).collect());
        let gpsi = grad_gamma(psi, self.params.gamma, &self.grid)?;
        let v = gpsi
            .iter()
            .zip(&gz)
            .map(|(gp, gzc)| {
                FieldR::from_vec(
                    (0..nh)
                        .map(|p| gp.data[p] - eps * gzc.data[p] * w.data[p])
                        .collect(),
                )
            })
            .collect();
        Ok(SurfaceVelocities { w, v })
    }
}

/// Analytic Dirichlet-Neumann operator of the flat strip (zeta = b = 0):
/// Fourier multiplier `sqrt(mu) |xi_gamma| tanh(sqrt(mu) |xi_gamma|)`.
pub fn dno_flat_analytic(
    psi: &FieldR,
    params: &DimensionlessParams,
    grid: &Grid,
) -> Result<FieldR> {
    let sqrt_mu = params.mu.sqrt();
    let gamma = params.gamma;
    apply_multiplier(
        psi,
        |kx, ky| {
            let xg = crate::spectral::xi_gamma_sq(kx, ky, gamma).sqrt();
            sqrt_mu * xg * (sqrt_mu * xg).tanh()
        },
        grid,
    )
}

/// Surface velocity formulas given an already-computed G psi:
/// `w = (G psi + eps mu grad zeta . grad psi) / (1 + eps^2 mu |grad zeta|^2)`,
/// `V = grad psi - eps w grad zeta` (twisted gradients throughout).
pub fn surface_velocities_from_g(
    g: &FieldR,
    psi: &FieldR,
    zeta: &FieldR,
    params: &DimensionlessParams,
    grid: &Grid,
) -> Result<SurfaceVelocities> {
    let eps = params.epsilon;
    let mu = params.mu;
    let gz = grad_gamma(zeta, params.gamma, grid)?;
    let gp = grad_gamma(psi, params.gamma, grid)?;
    let gz2 = vector_norm_sq(&gz);
    let dot = crate::spectral::vector_dot(&gz, &gp);
    let nh = grid.size();
    let mut w = FieldR::zeros(nh);
    for p in 0..nh {
        w.data[p] =
            (g.data[p] + eps * mu * dot.data[p]) / (1.0 + eps * eps * mu * gz2.data[p]);
    }
    let v = gp
        .iter()
        .zip(&gz)
        .map(|(gpc, gzc)| {
            FieldR::from_vec(
                (0..nh)
                    .map(|p| gpc.data[p] - eps * w.data[p] * gzc.data[p])
                    .collect(),
            )
        })
        .collect();
    Ok(SurfaceVelocities { w, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sobolev_norm;
    use std::f64::consts::PI;

    fn setup(
        n: usize,
        nz: usize,
        params: DimensionlessParams,
    ) -> (Arc<Grid>, Arc<StripGrid>, DnoSolver) {
        let grid = Arc::new(Grid::new_1d(n, 2.0 * PI).unwrap());
        let strip = Arc::new(StripGrid::new(nz).unwrap());
        let solver = DnoSolver::new(
            grid.clone(),
            strip.clone(),
            params,
            SolveOptions::default(),
        )
        .unwrap();
        (grid, strip, solver)
    }

    fn p1(epsilon: f64, mu: f64, beta: f64) -> DimensionlessParams {
        DimensionlessParams::new_1d(epsilon, mu, beta, 100.0).unwrap()
    }

    #[test]
    fn flat_coeffs_are_identity() {
        let params = p1(0.5, 0.3, 0.5);
        let (grid, strip, _s) = setup(16, 8, params);
        let z = FieldR::zeros(grid.size());
        let c = build_strip_transform(&z, &z, &params, &grid, &strip, 1e-6).unwrap();
        for j in 0..strip.nz() {
            for p in 0..grid.size() {
                let m = c.matrix_at(j, p);
                assert!((m[0] - 1.0).abs() < 1e-14);
                assert!(m[1].abs() < 1e-14);
                assert!((m[2] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_depth_bathymetry_is_vanishing_depth_error() {
        let params = DimensionlessParams::new_1d(0.0, 0.5, 1.0, 100.0).unwrap();
        let (grid, strip, _s) = setup(16, 8, params);
        let zeta = FieldR::zeros(grid.size());
        let b = grid.field_from_fn(|x, _| x.cos()); // max b = 1, beta = 1 -> h = 0
        let r = build_strip_transform(&zeta, &b, &params, &grid, &strip, 1e-6);
        assert!(matches!(r, Err(crate::error::Error::VanishingDepth { .. })));
    }

    #[test]
    fn variable_coeffs_are_positive_definite() {
        let params = DimensionlessParams::new_1d(1.0, 0.7, 1.0, 100.0).unwrap();
        let (grid, strip, _s) = setup(32, 10, params);
        let zeta = grid.field_from_fn(|x, _| 0.1 * x.cos());
        let b = grid.field_from_fn(|x, _| 0.5 * x.cos());
        let c = build_strip_transform(&zeta, &b, &params, &grid, &strip, 1e-6).unwrap();
        for j in 0..strip.nz() {
            for p in 0..grid.size() {
                let m = c.matrix_at(j, p); // [pxx, pxz, pzz]
                let tr = m[0] + m[2];
                let det = m[0] * m[2] - m[1] * m[1];
                let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
                let lmin = 0.5 * (tr - disc);
                let lmax = 0.5 * (tr + disc);
                assert!(lmin > 0.0 && lmax > 0.0, "eigenvalues {lmin}, {lmax}");
                assert!((det - 1.0).abs() < 1e-12, "det P should be 1 in d=1");
            }
        }
    }

    /// Separation of variables on the flat strip: psi = cos(kx) gives
    /// phi = cos(kx) cosh(sqrt(mu) k (z+1))/cosh(sqrt(mu) k).
    #[test]
    fn flat_strip_solution_matches_separation_of_variables() {
        for (k, mu) in [(1.0, 1.0), (2.0, 0.25)] {
            let params = p1(0.0, mu, 0.0);
            let (grid, strip, mut solver) = setup(32, 16, params);
            let zero = FieldR::zeros(grid.size());
            let psi = grid.field_from_fn(|x, _| (k * x).cos());
            let sol = solver.solve(&psi, &zero, &zero).unwrap();
            let a = mu.sqrt() * k;
            for (j, &z) in strip.z().iter().enumerate() {
                let profile = (a * (z + 1.0)).cosh() / a.cosh();
                for p in 0..grid.size() {
                    let (x, _) = grid.coords(p);
                    let exact = (k * x).cos() * profile;
                    let got = sol.phi.data[j * grid.size() + p];
                    assert!(
                        (got - exact).abs() < 1e-10,
                        "k={k} mu={mu} level {j}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn constant_dirichlet_data_extends_constantly_and_g_annihilates() {
        let params = p1(0.5, 0.4, 0.5);
        let (grid, strip, mut solver) = setup(16, 9, params);
        let zeta = grid.field_from_fn(|x, _| 0.2 * x.cos());
        let b = grid.field_from_fn(|x, _| 0.3 * (2.0 * x).sin());
        let psi = grid.field_from_fn(|_, _| 2.5);
        let sol = solver.solve(&psi, &zeta, &b).unwrap();
        for j in 0..strip.nz() {
            for p in 0..grid.size() {
                assert!((sol.phi.data[j * grid.size() + p] - 2.5).abs() < 1e-10);
            }
        }
        assert!(sol.g.max_abs() < 1e-10);
    }

    #[test]
    fn apply_dno_matches_flat_analytic_oracle() {
        for mu in [1.0, 0.1, 0.01] {
            let params = p1(0.0, mu, 0.0);
            let (grid, _strip, mut solver) = setup(64, 24, params);
            let zero = FieldR::zeros(grid.size());
            let psi = grid.field_from_fn(|x, _| x.cos() + 0.3 * (3.0 * x).sin());
            let g = solver.apply_dno(&psi, &zero, &zero).unwrap();
            let oracle = dno_flat_analytic(&psi, &params, &grid).unwrap();
            let scale = oracle.max_abs();
            for (a, b) in g.data.iter().zip(&oracle.data) {
                assert!((a - b).abs() < 1e-8 * scale, "mu={mu}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pcg_and_direct_agree_on_variable_coefficients() {
        let params = DimensionlessParams::new_1d(0.5, 0.3, 0.5, 50.0).unwrap();
        let grid = Arc::new(Grid::new_1d(16, 2.0 * PI).unwrap());
        let strip = Arc::new(StripGrid::new(8).unwrap());
        let zeta = grid.field_from_fn(|x, _| 0.3 * x.cos());
        let b = grid.field_from_fn(|x, _| 0.4 * (2.0 * x).cos());
        let psi = grid.field_from_fn(|x, _| x.sin());
        let mut pcg = DnoSolver::new(
            grid.clone(),
            strip.clone(),
            params,
            SolveOptions {
                method: SolveMethod::Pcg,
                ..Default::default()
            },
        )
        .unwrap();
        let mut direct = DnoSolver::new(
            grid.clone(),
            strip.clone(),
            params,
            SolveOptions {
                method: SolveMethod::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        let g1 = pcg.apply_dno(&psi, &zeta, &b).unwrap();
        let g2 = direct.apply_dno(&psi, &zeta, &b).unwrap();
        let scale = g2.max_abs();
        for (a, b) in g1.data.iter().zip(&g2.data) {
            assert!((a - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn pcg_converges_immediately_on_flat_strip() {
        let params = p1(0.0, 0.5, 0.0);
        let (grid, _strip, mut solver) = setup(32, 12, params);
        let zero = FieldR::zeros(grid.size());
        let psi = grid.field_from_fn(|x, _| (2.0 * x).cos());
        let sol = solver.solve(&psi, &zero, &zero).unwrap();
        assert!(
            sol.iterations <= 2,
            "flat preconditioner should be exact, took {}",
            sol.iterations
        );
    }

    #[test]
    fn symmetry_positivity_mean_on_variable_geometry() {
        let params = DimensionlessParams::new_1d(0.5, 0.2, 0.5, 50.0).unwrap();
        let (grid, _strip, mut solver) = setup(64, 16, params);
        let zeta = grid.field_from_fn(|x, _| 0.3 * x.cos() + 0.1 * (3.0 * x).sin());
        let b = grid.field_from_fn(|x, _| 0.4 * (2.0 * x).cos());
        let psi1 = grid.field_from_fn(|x, _| x.sin() + 0.2 * (4.0 * x).cos());
        let psi2 = grid.field_from_fn(|x, _| (2.0 * x).cos() - 0.5 * x.cos());
        let g1 = solver.apply_dno(&psi1, &zeta, &b).unwrap();
        let g2 = solver.apply_dno(&psi2, &zeta, &b).unwrap();
        let n1 = sobolev_norm(&psi1, 1.0, &grid).unwrap();
        let n2 = sobolev_norm(&psi2, 1.0, &grid).unwrap();
        let sym = (grid.inner(&g1, &psi2) - grid.inner(&psi1, &g2)).abs();
        assert!(sym <= 1e-10 * n1 * n2, "symmetry defect {sym}");
        let pos = grid.inner(&psi1, &g1);
        assert!(pos >= -1e-10 * n1 * n1, "positivity defect {pos}");
        assert!(pos > 0.0);
        let mean = grid.mean(&g1).abs();
        assert!(mean <= 1e-10 * n1, "mean defect {mean}");
    }

    /// (1/mu) G -> -Delta_gamma as mu -> 0 with O(mu) rate.
    #[test]
    fn shallow_limit_of_flat_multiplier() {
        let grid = Grid::new_1d(32, 2.0 * PI).unwrap();
        let psi = grid.field_from_fn(|x, _| x.cos() + 0.5 * (2.0 * x).sin());
        let lap = crate::spectral::laplacian_gamma(&psi, 1.0, &grid).unwrap();
        let mut errs = Vec::new();
        let mus = [1e-2, 1e-3, 1e-4];
        for &mu in &mus {
            let params = p1(0.0, mu, 0.0);
            let g = dno_flat_analytic(&psi, &params, &grid).unwrap();
            let mut resid = g.scale(1.0 / mu);
            resid.axpy(1.0, &lap);
            errs.push(grid.l2_norm(&resid));
        }
        let fit = crate::fit::power_law_fit(&mus, &errs).unwrap();
        assert!(fit.slope > 0.9, "observed order {}", fit.slope);
    }

    #[test]
    fn surface_velocities_match_strip_traces() {
        let params = DimensionlessParams::new_1d(1.0, 1.0, 0.0, 100.0).unwrap();
        let (grid, _strip, mut solver) = setup(64, 24, params);
        let zeta = grid.field_from_fn(|x, _| 0.1 * x.cos());
        let b = FieldR::zeros(grid.size());
        let psi = grid.field_from_fn(|x, _| x.sin());
        let sv = solver.surface_velocities(&psi, &zeta, &b).unwrap();
        let tv = solver.trace_velocities(&psi, &zeta, &b).unwrap();
        let scale = sv.w.max_abs().max(sv.v[0].max_abs());
        for (a, b) in sv.w.data.iter().zip(&tv.w.data) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
        for (a, b) in sv.v[0].data.iter().zip(&tv.v[0].data) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn surface_velocities_collapse_at_flat_surface() {
        let params = DimensionlessParams::new_1d(0.5, 0.4, 0.5, 100.0).unwrap();
        let (grid, _strip, mut solver) = setup(32, 12, params);
        let zeta = FieldR::zeros(grid.size());
        let b = grid.field_from_fn(|x, _| 0.3 * x.cos());
        let psi = grid.field_from_fn(|x, _| x.cos());
        let sv = solver.surface_velocities(&psi, &zeta, &b).unwrap();
        let g = solver.apply_dno(&psi, &zeta, &b).unwrap();
        for (a, b) in sv.w.data.iter().zip(&g.data) {
            assert!((a - b).abs() < 1e-12);
        }
        let exact_v = grid.field_from_fn(|x, _| -x.sin());
        for (a, b) in sv.v[0].data.iter().zip(&exact_v.data) {
            assert!((a - b).abs() < 1e-10);
        }
        // psi = const -> w = 0, V = 0
        let c = grid.field_from_fn(|_, _| 1.0);
        let sv0 = solver.surface_velocities(&c, &zeta, &b).unwrap();
        assert!(sv0.w.max_abs() < 1e-10);
        assert!(sv0.v[0].max_abs() < 1e-12);
    }

    #[test]
    fn shape_derivative_trivial_cases() {
        let params = p1(0.5, 1.0, 0.0);
        let (grid, _strip, mut solver) = setup(32, 12, params);
        let zero = FieldR::zeros(grid.size());
        let psi = grid.field_from_fn(|x, _| x.cos());
        // h = 0 direction
        let dg = solver.shape_derivative(&zero, &psi, &zero, &zero).unwrap();
        assert!(dg.max_abs() < 1e-12);
        // eps = 0: derivative carries an eps prefactor
        let params0 = p1(0.0, 1.0, 0.0);
        let mut solver0 = DnoSolver::new(
            solver.grid().clone(),
            solver.strip().clone(),
            params0,
            SolveOptions::default(),
        )
        .unwrap();
        let h = grid.field_from_fn(|x, _| x.cos());
        let dg0 = solver0.shape_derivative(&h, &psi, &zero, &zero).unwrap();
        assert!(dg0.max_abs() < 1e-12);
        let fd0 = solver0
            .shape_derivative_fd(&h, &psi, &zero, &zero, 1e-3)
            .unwrap();
        assert!(fd0.max_abs() < 1e-9);
    }

    #[test]
    fn shape_derivative_matches_finite_difference() {
        let params = p1(0.5, 1.0, 0.0);
        let (grid, _strip, mut solver) = setup(64, 20, params);
        let zero = FieldR::zeros(grid.size());
        let psi = grid.field_from_fn(|x, _| x.cos());
        let h = grid.field_from_fn(|x, _| x.cos());
        let formula = solver.shape_derivative(&h, &psi, &zero, &zero).unwrap();
        let mut errs = Vec::new();
        let deltas = [1e-2, 1e-3];
        for &d in &deltas {
            let fd = solver.shape_derivative_fd(&h, &psi, &zero, &zero, d).unwrap();
            errs.push(grid.l2_norm(&fd.sub(&formula)));
        }
        // Centered differences: observed order >= 1 (should be ~2).
        let order = (errs[0] / errs[1]).log10();
        assert!(order >= 1.0, "observed order {order}, errs {errs:?}");
        // Richardson extrapolation of the two FD values kills the leading error.
        let fd1 = solver
            .shape_derivative_fd(&h, &psi, &zero, &zero, deltas[0])
            .unwrap();
        let fd2 = solver
            .shape_derivative_fd(&h, &psi, &zero, &zero, deltas[1])
            .unwrap();
        let p = 10f64.powf(order.min(2.0));
        let extrap = fd2.scale(p / (p - 1.0)).sub(&fd1.scale(1.0 / (p - 1.0)));
        let mismatch = grid.l2_norm(&extrap.sub(&formula));
        assert!(mismatch < 1e-5, "extrapolated mismatch {mismatch}");
    }

    #[test]
    fn self_convergence_under_resolution_doubling() {
        let params = DimensionlessParams::new_1d(1.0, 0.1, 1.0, 100.0).unwrap();
        let fine = |n: usize, nz: usize| -> FieldR {
            let grid = Arc::new(Grid::new_1d(n, 2.0 * PI).unwrap());
            let strip = Arc::new(StripGrid::new(nz).unwrap());
            let mut solver =
                DnoSolver::new(grid.clone(), strip, params, SolveOptions::default()).unwrap();
            let zeta = grid.field_from_fn(|x, _| 0.1 * x.cos());
            let b = grid.field_from_fn(|x, _| 0.3 * (2.0 * x).cos());
            let psi = grid.field_from_fn(|x, _| x.cos());
            solver.apply_dno(&psi, &zeta, &b).unwrap()
        };
        let g32 = fine(32, 12);
        let g64 = fine(64, 24);
        let g128 = fine(128, 48);
        // Compare on the coarse nodes (coarse grids nest in fine ones).
        let err_coarse: f64 = (0..32)
            .map(|i| (g32.data[i] - g128.data[4 * i]).abs())
            .fold(0.0, f64::max);
        let err_mid: f64 = (0..64)
            .map(|i| (g64.data[i] - g128.data[2 * i]).abs())
            .fold(0.0, f64::max);
        assert!(
            err_coarse >= 4.0 * err_mid || err_mid < 1e-12,
            "coarse {err_coarse} vs mid {err_mid}"
        );
    }

    #[test]
    fn doubled_resolution_cross_check_on_variable_geometry() {
        // eps=1, beta=1 with mu=0.1: value vs doubled-resolution solve.
        let params = DimensionlessParams::new_1d(1.0, 0.1, 1.0, 100.0).unwrap();
        let run = |n: usize, nz: usize| -> FieldR {
            let grid = Arc::new(Grid::new_1d(n, 2.0 * PI).unwrap());
            let strip = Arc::new(StripGrid::new(nz).unwrap());
            let mut solver =
                DnoSolver::new(grid.clone(), strip, params, SolveOptions::default()).unwrap();
            let zeta = grid.field_from_fn(|x, _| 0.1 * x.cos());
            let b = grid.field_from_fn(|x, _| 0.3 * (2.0 * x).cos());
            let psi = grid.field_from_fn(|x, _| x.cos());
            solver.apply_dno(&psi, &zeta, &b).unwrap()
        };
        let g = run(64, 24);
        let gref = run(128, 48);
        let scale = gref.max_abs();
        for i in 0..64 {
            let rel = (g.data[i] - gref.data[2 * i]).abs() / scale;
            assert!(rel < 1e-6, "rel err {rel} at {i}");
        }
    }

    #[test]
    fn flat_equivalence_ratio_closed_form() {
        // (psi, (1/mu) G psi)/|P psi|^2 on a single mode k equals
        // tanh(x)(1+x)/x with x = sqrt(mu) k; bounded on mu in [1e-4, 1].
        let grid = Grid::new_1d(32, 2.0 * PI).unwrap();
        let psi = grid.field_from_fn(|x, _| x.cos());
        for mu in [1.0, 1e-1, 1e-2, 1e-3, 1e-4] {
            let params = p1(0.0, mu, 0.0);
            let g = dno_flat_analytic(&psi, &params, &grid).unwrap();
            let p = crate::spectral::apply_p(&psi, &params, &grid).unwrap();
            let ratio = grid.inner(&psi, &g) / mu / grid.inner(&p, &p);
            let x = mu.sqrt();
            let closed = x.tanh() * (1.0 + x) / x;
            assert!((ratio - closed).abs() < 1e-10 * closed);
            assert!(ratio > 0.3 && ratio < 3.0, "ratio {ratio} at mu={mu}");
        }
    }

    #[test]
    fn dno_2d_flat_matches_analytic() {
        let params = DimensionlessParams::new(0.0, 0.5, 0.0, 0.7, 100.0, 2).unwrap();
        let grid = Arc::new(Grid::new_2d(16, 16, 2.0 * PI, 2.0 * PI).unwrap());
        let strip = Arc::new(StripGrid::new(12).unwrap());
        let mut solver =
            DnoSolver::new(grid.clone(), strip, params, SolveOptions::default()).unwrap();
        let zero = FieldR::zeros(grid.size());
        let psi = grid.field_from_fn(|x, y| x.cos() * (2.0 * y).sin() + 0.5 * y.cos());
        let g = solver.apply_dno(&psi, &zero, &zero).unwrap();
        let oracle = dno_flat_analytic(&psi, &params, &grid).unwrap();
        let scale = oracle.max_abs();
        for (a, b) in g.data.iter().zip(&oracle.data) {
            assert!((a - b).abs() < 1e-8 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn scaling_report_degenerate_on_constant_data() {
        let params = p1(0.5, 0.1, 0.5);
        let grid = Arc::new(Grid::new_1d(16, 2.0 * PI).unwrap());
        let strip = Arc::new(StripGrid::new(8).unwrap());
        let zeta = FieldR::zeros(grid.size());
        let b = FieldR::zeros(grid.size());
        let konst = grid.field_from_fn(|_, _| 1.0);
        let inputs = ScalingInputs {
            zeta: &zeta,
            b: &b,
            psi_high: &konst,
            psi_low: &konst,
            psi_pair: &konst,
            velocity: &konst,
            direction: &konst,
        };
        let report = verify_operator_scalings(
            &grid,
            &strip,
            &params,
            &[1.0, 0.1, 0.01],
            &inputs,
            SolveOptions::default(),
        )
        .unwrap();
        for case in &report.cases {
            assert!(case.degenerate, "{} should be degenerate", case.name);
        }
    }
}
