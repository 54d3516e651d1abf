//! Brute-force finite-difference eigensolver for the full two-variable problem.
//!
//! Discretizes `-∂²/∂x² - ∂²/∂ξ² + V(x, ξ)` on a rectangle with the 5-point
//! stencil and Dirichlet edges, then finds the lowest eigenvalues by block
//! inverse subspace iteration on the shifted operator. The shift sits below
//! the spectrum, so `H - σ` is positive definite and a banded Cholesky
//! factorization does the inner solves.
//!
//! Nothing here touches the channel pipeline. The only shared input is the
//! potential itself.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryKind, Grid};
use crate::reduction::{ReductionRecipe, TwoBodyPotential};
use crate::spectra::ground_state;

pub const MAX_INTERIOR_POINTS: usize = 90_000;
pub const MAX_STATES: usize = 12;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 2000;

/// Monotonicity slack for channel-count studies.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub nxi: usize,
}

impl Grid2D {
    pub fn new(x: (f64, f64, usize), xi: (f64, f64, usize)) -> Result<Self> {
        let g = Grid2D {
            x_min: x.0,
            x_max: x.1,
            nx: x.2,
            xi_min: xi.0,
            xi_max: xi.1,
            nxi: xi.2,
        };
        g.check()?;
        Ok(g)
    }

    pub fn square(min: f64, max: f64, n: usize) -> Result<Self> {
        Self::new((min, max, n), (min, max, n))
    }

    fn check(&self) -> Result<()> {
        let ok = |a: f64, b: f64, n: usize| a.is_finite() && b.is_finite() && a < b && n >= 3;
        if !ok(self.x_min, self.x_max, self.nx) || !ok(self.xi_min, self.xi_max, self.nxi) {
            return Err(Error::domain(
                "2D grid needs finite ranges and at least 3 points per axis",
            ));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hxi(&self) -> f64 {
        (self.xi_max - self.xi_min) / (self.nxi - 1) as f64
    }

    pub fn n_interior(&self) -> usize {
        (self.nx - 2) * (self.nxi - 2)
    }
}

/// Banded symmetric positive definite Cholesky factor, row `i` holding
/// `L[i][i-b..=i]` in `band[i*(b+1)..]`.
struct BandCholesky {
    n: usize,
    b: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    fn factor(n: usize, b: usize, mut band: Vec<f64>) -> Result<Self> {
        let w = b + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(b));
                let mut sum = band[i * w + (j + b - i)];
                for k in k0..j {
                    sum -= band[i * w + (k + b - i)] * band[j * w + (k + b - j)];
                }
                if j == i {
                    if sum <= 0.0 {
                        return Err(Error::Conditioning(
                            "shifted 2D operator is not positive definite".into(),
                        ));
                    }
                    band[i * w + b] = sum.sqrt();
                } else {
                    band[i * w + (j + b - i)] = sum / band[j * w + b];
                }
            }
        }
        Ok(BandCholesky { n, b, band })
    }

    /// Solves `L Lᵀ Y = B` in place for `p` right-hand sides stored row-major.
    fn solve_block(&self, rhs: &mut [f64], p: usize) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let (done, rest) = rhs.split_at_mut(i * p);
            let row = &mut rest[..p];
            for k in i.saturating_sub(b)..i {
                let l = self.band[i * w + (k + b - i)];
                for (r, y) in row.iter_mut().zip(&done[k * p..(k + 1) * p]) {
                    *r -= l * y;
                }
            }
            let d = self.band[i * w + b];
            row.iter_mut().for_each(|r| *r /= d);
        }
        for i in (0..n).rev() {
            let (head, rest) = rhs.split_at_mut(i * p);
            let row = &mut rest[..p];
            let d = self.band[i * w + b];
            row.iter_mut().for_each(|r| *r /= d);
            for k in i.saturating_sub(b)..i {
                let l = self.band[i * w + (k + b - i)];
                for (y, r) in head[k * p..(k + 1) * p].iter_mut().zip(row.iter()) {
                    *y -= l * r;
                }
            }
        }
    }
}

struct Stencil {
    mx: usize,
    mxi: usize,
    cx: f64,
    cxi: f64,
    potential: Vec<f64>,
}

impl Stencil {
    fn new(spec: &TwoBodyPotential, g: &Grid2D) -> Self {
        let (mx, mxi) = (g.nx - 2, g.nxi - 2);
        let (hx, hxi) = (g.hx(), g.hxi());
        let mut potential = Vec::with_capacity(mx * mxi);
        for i in 0..mx {
            let x = g.x_min + (i + 1) as f64 * hx;
            for j in 0..mxi {
                potential.push(spec.eval(x, g.xi_min + (j + 1) as f64 * hxi));
            }
        }
        Stencil {
            mx,
            mxi,
            cx: 1.0 / (hx * hx),
            cxi: 1.0 / (hxi * hxi),
            potential,
        }
    }

    fn n(&self) -> usize {
        self.mx * self.mxi
    }

    /// Smallest eigenvalue of the discrete Laplacian part.
    fn laplacian_floor(&self) -> f64 {
        let edge = |c: f64, m: usize| {
            let s = (std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin();
            4.0 * c * s * s
        };
        edge(self.cx, self.mx) + edge(self.cxi, self.mxi)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (mx, mxi) = (self.mx, self.mxi);
        let diag = 2.0 * (self.cx + self.cxi);
        for i in 0..mx {
            for j in 0..mxi {
                let p = i * mxi + j;
                let mut s = (diag + self.potential[p]) * v[p];
                if j > 0 {
                    s -= self.cxi * v[p - 1];
                }
                if j + 1 < mxi {
                    s -= self.cxi * v[p + 1];
                }
                if i > 0 {
                    s -= self.cx * v[p - mxi];
                }
                if i + 1 < mx {
                    s -= self.cx * v[p + mxi];
                }
                out[p] = s;
            }
        }
    }

    fn shifted_band(&self, sigma: f64) -> Vec<f64> {
        let b = self.mxi;
        let w = b + 1;
        let diag = 2.0 * (self.cx + self.cxi) - sigma;
        let mut band = vec![0.0; self.n() * w];
        for p in 0..self.n() {
            band[p * w + b] = diag + self.potential[p];
            if p % self.mxi > 0 {
                band[p * w + b - 1] = -self.cxi;
            }
            if p >= self.mxi {
                band[p * w] = -self.cx;
            }
        }
        band
    }
}

/// Lowest `n_states` eigenvalues of the discretized 2D Hamiltonian, ascending.
pub fn solve_2d_eigen(spec: &TwoBodyPotential, g2: &Grid2D, n_states: usize) -> Result<Vec<f64>> {
    g2.check()?;
    if n_states == 0 || n_states > MAX_STATES {
        return Err(Error::domain(format!(
            "n_states must be in 1..={MAX_STATES}"
        )));
    }
    if g2.n_interior() > MAX_INTERIOR_POINTS {
        return Err(Error::Conditioning(format!(
            "2D grid has {} interior points, limit is {MAX_INTERIOR_POINTS}",
            g2.n_interior()
        )));
    }
    let op = Stencil::new(spec, g2);
    let n = op.n();
    if n_states > n {
        return Err(Error::domain("more states requested than interior points"));
    }
    if let Some(bad) = op.potential.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "potential not finite on the 2D grid ({bad})"
        )));
    }
    let v_min = op.potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma = op.laplacian_floor() + v_min - 1.0;
    let chol = BandCholesky::factor(n, op.mxi, op.shifted_band(sigma))?;

    let p = (2 * n_states).max(n_states + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed2d);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let mut hv = vec![0.0; n];

    for _ in 0..MAX_ITERATIONS {
        let mut rows: Vec<f64> = x.transpose().as_slice().to_vec();
        chol.solve_block(&mut rows, p);
        let q = DMatrix::from_row_slice(n, p, &rows).qr().q();
        let mut hq = DMatrix::zeros(n, p);
        for k in 0..p {
            op.apply(q.column(k).as_slice(), &mut hv);
            hq.column_mut(k).copy_from_slice(&hv);
        }
        let small = q.transpose() * &hq;
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
        let theta: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

        x = &q * &vecs;
        let hx = &hq * &vecs;
        let converged = (0..n_states).all(|k| {
            let r: DVector<f64> = hx.column(k) - x.column(k) * theta[k];
            r.norm() <= RESIDUAL_TOL
        });
        if converged {
            return Ok(theta[..n_states].to_vec());
        }
    }
    Err(Error::NoConvergence {
        what: "2D subspace iteration",
        iterations: MAX_ITERATIONS,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    /// `(N_ch, ground energy)` in the order requested.
    pub rows: Vec<(usize, f64)>,
    /// Non-increasing within [`MONOTONE_SLACK`]; trivially true for one row.
    pub monotone: bool,
}

/// Ground energy of the reduced channel problem for each truncation.
pub fn convergence_study(
    recipe: &ReductionRecipe,
    grid: &Grid,
    channel_counts: &[usize],
) -> Result<ConvergenceStudy> {
    if channel_counts.is_empty() || channel_counts.contains(&0) {
        return Err(Error::domain(
            "channel counts must be positive and non-empty",
        ));
    }
    if channel_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("channel counts must be strictly ascending"));
    }
    let mut rows = Vec::with_capacity(channel_counts.len());
    for &n in channel_counts {
        let s = recipe
            .with_channels(n)
            .scenario(grid, BoundaryKind::BoundBox)?;
        rows.push((n, ground_state(&s)?.energy));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1 + MONOTONE_SLACK);
    Ok(ConvergenceStudy { rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::Profile;
    use std::f64::consts::PI;

    fn zero() -> TwoBodyPotential {
        TwoBodyPotential::SeparableProduct {
            f: Profile::Constant { value: 0.0 },
            g: Profile::Constant { value: 0.0 },
        }
    }

    /// Exact eigenvalues of the 5-point stencil for `V = 0`.
    fn discrete_box(n: usize, l: f64, k: usize) -> f64 {
        let h = l / (n - 1) as f64;
        4.0 / (h * h) * (k as f64 * PI * h / (2.0 * l)).sin().powi(2)
    }

    #[test]
    fn band_cholesky_matches_dense() {
        let n = 7;
        let b = 2;
        let dense = DMatrix::from_fn(n, n, |i, j| {
            let d = i.abs_diff(j);
            match d {
                0 => 4.0 + i as f64 * 0.1,
                1 => -1.0,
                2 => 0.3,
                _ => 0.0,
            }
        });
        let mut band = vec![0.0; n * (b + 1)];
        for i in 0..n {
            for j in i.saturating_sub(b)..=i {
                band[i * (b + 1) + (j + b - i)] = dense[(i, j)];
            }
        }
        let chol = BandCholesky::factor(n, b, band).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut x = rhs.clone();
        chol.solve_block(&mut x, 1);
        let back = &dense * DVector::from_vec(x);
        for i in 0..n {
            assert!((back[i] - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn free_box_matches_discrete_spectrum() {
        let g = Grid2D::square(0.0, PI, 41).unwrap();
        let e = solve_2d_eigen(&zero(), &g, 4).unwrap();
        let mut want: Vec<f64> = (1..5)
            .flat_map(|a| (1..5).map(move |b| (a, b)))
            .map(|(a, b)| discrete_box(41, PI, a) + discrete_box(41, PI, b))
            .collect();
        want.sort_by(f64::total_cmp);
        for k in 0..4 {
            assert!(
                (e[k] - want[k]).abs() < 1e-9,
                "{k}: {} vs {}",
                e[k],
                want[k]
            );
        }
    }

    #[test]
    fn caps_are_enforced() {
        let g = Grid2D::square(0.0, 1.0, 303).unwrap();
        assert!(matches!(
            solve_2d_eigen(&zero(), &g, 1),
            Err(Error::Conditioning(_))
        ));
        let g = Grid2D::square(0.0, 1.0, 11).unwrap();
        assert!(solve_2d_eigen(&zero(), &g, 13).is_err());
        assert!(Grid2D::square(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn study_rejects_unsorted_counts() {
        let recipe = ReductionRecipe {
            basis: crate::reduction::BasisSet::particle_in_box(0.0, PI, 1).unwrap(),
            spec: zero(),
            n_xi: 201,
        };
        let grid = crate::model::build_grid(0.0, PI, 201).unwrap();
        assert!(convergence_study(&recipe, &grid, &[2, 1]).is_err());
        let one = convergence_study(&recipe, &grid, &[1]).unwrap();
        assert!(one.monotone);
        assert!((one.rows[0].1 - 2.0).abs() < 1e-6);
    }
}
