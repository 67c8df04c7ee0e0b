use std::f64::consts::PI;
use std::sync::Arc;
use wavelab::dno::{DnoSolver, SolveOptions, StripGrid};
use wavelab::params::DimensionlessParams;
use wavelab::spectral::{FieldR, Grid};

fn main() {
    for nz in [8usize, 12, 16, 24, 32, 48] {
        let mu = 1.0f64;
        let k = 1.0f64;
        let params = DimensionlessParams::new_1d(0.0, mu, 0.0, 100.0).unwrap();
        let grid = Arc::new(Grid::new_1d(32, 2.0 * PI).unwrap());
        let strip = Arc::new(StripGrid::new(nz).unwrap());
        let mut solver = DnoSolver::new(grid.clone(), strip.clone(), params, SolveOptions::default()).unwrap();
        let zero = FieldR::zeros(grid.size());
        let psi = grid.field_from_fn(|x, _| (k * x).cos());
        let sol = solver.solve(&psi, &zero, &zero).unwrap();
        let a = mu.sqrt() * k;
        let mut maxerr: f64 = 0.0;
        for (j, &z) in strip.z().iter().enumerate() {
            let profile = (a * (z + 1.0)).cosh() / a.cosh();
            for p in 0..grid.size() {
                let (x, _) = grid.coords(p);
                let exact = (k * x).cos() * profile;
                let got = sol.phi.data[j * grid.size() + p];
                maxerr = maxerr.max((got - exact).abs());
            }
        }
        // g error vs analytic
        let gexact = grid.field_from_fn(|x, _| a * a.tanh() * (k*x).cos());
        let gerr = sol.g.sub(&gexact).max_abs();
        println!("nz={nz:3}  phi err {maxerr:.3e}   g err {gerr:.3e}  iters {} resid {:.1e}", sol.iterations, sol.residual);
    }
}
