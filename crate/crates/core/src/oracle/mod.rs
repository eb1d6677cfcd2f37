//! Reference solutions and error metrics: closed-form advection, ETDRK4
//! pseudo-spectral integration for periodic Allen-Cahn and
//! Kuramoto-Sivashinsky, and relative-L² evaluation.

mod etdrk4;
mod gridfile;

pub use etdrk4::{spectral_solve, SpectralPde};
pub use gridfile::{read_grid, write_grid};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::problems::Problem;

/// Default solver step sizes per benchmark.
pub const DEFAULT_DT_ALLEN_CAHN: f64 = 1e-3;
pub const DEFAULT_DT_KS: f64 = 2.5e-4;

/// Default spectral resolutions. Allen-Cahn needs enough modes to resolve
/// phase interfaces of width ~ sqrt(diffusivity) = 0.01 on a length-2 cell.
pub const DEFAULT_N_ALLEN_CAHN: usize = 1024;
pub const DEFAULT_N_KS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Analytic,
    Spectral { n_modes: usize, dt: f64 },
}

/// A reference solution on a space-time grid. `xs` is a uniform periodic grid
/// with the right endpoint excluded (the period is implied); `values` is
/// stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub problem: String,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl GridSolution {
    pub fn value(&self, ti: usize, xi: usize) -> f64 {
        self.values[ti * self.xs.len() + xi]
    }

    pub fn time_slice(&self, ti: usize) -> &[f64] {
        let n = self.xs.len();
        &self.values[ti * n..(ti + 1) * n]
    }

    pub fn final_slice(&self) -> &[f64] {
        self.time_slice(self.times.len() - 1)
    }

    pub fn assert_valid(&self) -> Result<()> {
        if self.values.len() != self.times.len() * self.xs.len() {
            return Err(Error::ShapeError("grid value count mismatch".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::FileFormat("grid contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Linear interpolation on a uniform periodic grid covering `[x_lo, x_lo + len)`.
pub fn interp_periodic(x_lo: f64, len: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let s = (x - x_lo) / len * n as f64;
    let i0 = s.floor();
    let frac = s - i0;
    let i = (i0 as i64).rem_euclid(n as i64) as usize;
    let j = (i + 1) % n;
    values[i] * (1.0 - frac) + values[j] * frac
}

/// Method-of-characteristics solution of `u_t + c·u_x = 0` with periodic `g`:
/// `u(t, x) = g((x − ct) mod 2π)`.
pub fn advection_exact(
    g: impl Fn(f64) -> f64,
    c: f64,
    times: &[f64],
    xs: &[f64],
) -> GridSolution {
    let period = std::f64::consts::TAU;
    let mut values = Vec::with_capacity(times.len() * xs.len());
    for &t in times {
        for &x in xs {
            values.push(g((x - c * t).rem_euclid(period)));
        }
    }
    GridSolution {
        problem: "advection".to_string(),
        times: times.to_vec(),
        xs: xs.to_vec(),
        values,
        provenance: Provenance::Analytic,
    }
}

/// `‖pred − ref‖₂ / ‖ref‖₂` over matching flattened grids.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::ShapeError(format!(
            "grid size mismatch: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        num += (p - r) * (p - r);
        den += r * r;
    }
    if den == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok((num / den).sqrt())
}

/// Uniform periodic grid on `[lo, hi)` with `n` points.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect()
}

/// Uniform time stamps `0..=t_end` with `n_save + 1` entries.
pub fn uniform_times(t_end: f64, n_save: usize) -> Vec<f64> {
    (0..=n_save)
        .map(|i| t_end * i as f64 / n_save as f64)
        .collect()
}

/// Cache directory for reference grids, from `PINN_CACHE_DIR`.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("PINN_CACHE_DIR").map(PathBuf::from)
}

fn cache_key(problem: &str, n_modes: usize, dt: f64, t_end: f64, n_save: usize, nx_out: usize) -> String {
    format!("{problem}_N{n_modes}_dt{dt:e}_T{t_end:e}_S{n_save}_X{nx_out}.grid")
}

/// Reference solution for a named benchmark, via the solver appropriate to
/// it: analytic for advection, ETDRK4 spectral for Allen-Cahn and KS.
/// Results are cached to `cache` (if given) keyed by problem and solver
/// parameters, in the documented grid file format.
pub fn reference_solution(
    problem: &dyn Problem,
    n_modes: usize,
    dt: f64,
    n_save: usize,
    nx_out: usize,
    cache: Option<&Path>,
) -> Result<GridSolution> {
    let domain = problem.domain();
    let times = uniform_times(domain.t1, n_save);
    let xs = uniform_grid(domain.x_lo, domain.x_hi, nx_out);
    match problem.name() {
        "advection" => {
            let c = problem
                .constants()
                .iter()
                .find(|(n, _)| n == "c")
                .map(|(_, v)| *v)
                .expect("advection constant");
            Ok(advection_exact(|x| problem.ic(x), c, &times, &xs))
        }
        "heat_dirichlet" => {
            let mut values = Vec::with_capacity(times.len() * xs.len());
            for &t in &times {
                for &x in &xs {
                    values.push(problem.exact(t, x).expect("heat solution"));
                }
            }
            Ok(GridSolution {
                problem: problem.name().to_string(),
                times,
                xs,
                values,
                provenance: Provenance::Analytic,
            })
        }
        name @ ("allen_cahn" | "ks") => {
            let key = cache_key(name, n_modes, dt, domain.t1, n_save, nx_out);
            if let Some(dir) = cache {
                let path = dir.join(&key);
                if path.exists() {
                    let sol = read_grid(&path)?;
                    sol.assert_valid()?;
                    return Ok(sol);
                }
            }
            let pde = SpectralPde::from_problem(problem)?;
            let sol = spectral_solve(
                &pde,
                |x| problem.ic(x),
                (domain.x_lo, domain.x_hi),
                n_modes,
                dt,
                domain.t1,
                n_save,
                nx_out,
            )?;
            if let Some(dir) = cache {
                std::fs::create_dir_all(dir)?;
                write_grid(&dir.join(&key), &sol)?;
            }
            Ok(sol)
        }
        other => Err(Error::InvalidConfig(format!(
            "no reference solver for problem `{other}`"
        ))),
    }
}
