//! Projection of a two-variable potential `V(x, ξ)` onto a basis `Φ_α(ξ)`:
//!
//! ```text
//! V_αβ(x) = ∫ dξ Φ_α(ξ) V(x, ξ) Φ_β(ξ)
//! ```
//!
//! The basis is the particle-in-a-box set on `[xi_min, xi_max]`, whose
//! eigenvalues `(nπ/L)²` become the channel thresholds. Integrals use
//! composite Simpson, split at the discontinuities of the potential in `ξ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryKind, ChannelSet, Grid, PotentialMatrixField, Scenario};

pub const DEFAULT_XI_POINTS: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `Φ_n(ξ) = √(2/L) sin(nπ(ξ - xi_min)/L)`.
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub kind: BasisKind,
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_functions: usize,
}

impl BasisSet {
    pub fn particle_in_box(xi_min: f64, xi_max: f64, n_functions: usize) -> Result<Self> {
        let b = Self {
            kind: BasisKind::Box,
            xi_min,
            xi_max,
            n_functions,
        };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.xi_min.is_finite() && self.xi_max.is_finite() && self.xi_min < self.xi_max) {
            return Err(Error::domain(format!(
                "basis interval [{}, {}] is empty",
                self.xi_min, self.xi_max
            )));
        }
        if self.n_functions == 0 {
            return Err(Error::domain("basis needs at least one function"));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.xi_max - self.xi_min
    }

    /// `Φ_α(ξ)` with 1-based `alpha`.
    pub fn eval(&self, alpha: usize, xi: f64) -> Result<f64> {
        if alpha < 1 || alpha > self.n_functions {
            return Err(Error::domain(format!(
                "basis index {alpha} outside 1..={}",
                self.n_functions
            )));
        }
        if !(self.xi_min..=self.xi_max).contains(&xi) {
            return Err(Error::domain(format!(
                "xi = {xi} outside [{}, {}]",
                self.xi_min, self.xi_max
            )));
        }
        Ok(self.value(alpha, xi))
    }

    fn value(&self, alpha: usize, xi: f64) -> f64 {
        let l = self.length();
        // exact zeros at both walls
        if xi == self.xi_min || xi == self.xi_max {
            return 0.0;
        }
        (2.0 / l).sqrt() * (alpha as f64 * std::f64::consts::PI * (xi - self.xi_min) / l).sin()
    }

    /// Threshold energies `ε_n = (nπ/L)²`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let k = std::f64::consts::PI / self.length();
        (1..=self.n_functions)
            .map(|n| (n as f64 * k).powi(2))
            .collect()
    }
}

pub fn basis_eval(b: &BasisSet, alpha: usize, xi: f64) -> Result<f64> {
    b.eval(alpha, xi)
}

pub fn compute_thresholds(b: &BasisSet) -> Vec<f64> {
    b.eigenvalues()
}

/// One-variable building block for separable potentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `height` on `[start, end]`, zero outside, half height on the edges.
    SquareStep {
        height: f64,
        start: f64,
        end: f64,
    },
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => amplitude * (-0.5 * ((t - center) / width).powi(2)).exp(),
            Profile::SquareStep { height, start, end } => {
                if t > start && t < end {
                    height
                } else if t == start || t == end {
                    0.5 * height
                } else {
                    0.0
                }
            }
            Profile::Linear { slope, intercept } => slope * t + intercept,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::SquareStep { start, end, .. } => vec![start, end],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub weight: f64,
    pub potential: TwoBodyPotential,
}

/// The full two-variable potential `V(x, ξ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TwoBodyPotential {
    /// `f(x) · g(ξ)`.
    SeparableProduct {
        f: Profile,
        g: Profile,
    },
    /// `strength · (x - x0) · (ξ - xi0)`.
    Bilinear {
        strength: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        xi0: f64,
    },
    /// Bilinear interpolation of `values[ix][ixi]` on the `x` and `xi` axes.
    Tabulated2d {
        x: Vec<f64>,
        xi: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Sum {
        terms: Vec<WeightedTerm>,
    },
}

impl TwoBodyPotential {
    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        match self {
            TwoBodyPotential::SeparableProduct { f, g } => f.eval(x) * g.eval(xi),
            TwoBodyPotential::Bilinear { strength, x0, xi0 } => strength * (x - x0) * (xi - xi0),
            TwoBodyPotential::Tabulated2d {
                x: xs,
                xi: xis,
                values,
            } => {
                let (i, tx) = locate(xs, x);
                let (j, ty) = locate(xis, xi);
                let v00 = values[i][j];
                let v01 = values[i][j + 1];
                let v10 = values[i + 1][j];
                let v11 = values[i + 1][j + 1];
                (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
            }
            TwoBodyPotential::Sum { terms } => terms
                .iter()
                .map(|t| t.weight * t.potential.eval(x, xi))
                .sum(),
        }
    }

    /// Points in `ξ` where the potential may be discontinuous or kinked.
    pub fn xi_breakpoints(&self) -> Vec<f64> {
        match self {
            TwoBodyPotential::SeparableProduct { g, .. } => g.breakpoints(),
            TwoBodyPotential::Bilinear { .. } => Vec::new(),
            TwoBodyPotential::Tabulated2d { xi, .. } => xi.clone(),
            TwoBodyPotential::Sum { terms } => terms
                .iter()
                .flat_map(|t| t.potential.xi_breakpoints())
                .collect(),
        }
    }

    /// Checks table shapes and coverage of the basis interval and `x` range.
    pub fn violations(&self, basis: &BasisSet, x_range: (f64, f64)) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            TwoBodyPotential::Tabulated2d { x, xi, values } => {
                let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
                if x.len() < 2 || xi.len() < 2 || !sorted(x) || !sorted(xi) {
                    out.push(
                        "tabulated_2d: axes need at least 2 strictly increasing entries".into(),
                    );
                    return out;
                }
                if values.len() != x.len() || values.iter().any(|r| r.len() != xi.len()) {
                    out.push("tabulated_2d: values shape does not match axes".into());
                }
                if xi[0] > basis.xi_min || xi[xi.len() - 1] < basis.xi_max {
                    out.push("tabulated_2d: xi axis does not cover the basis interval".into());
                }
                if x[0] > x_range.0 || x[x.len() - 1] < x_range.1 {
                    out.push("tabulated_2d: x axis does not cover the grid".into());
                }
                if values.iter().flatten().any(|v| !v.is_finite()) {
                    out.push("tabulated_2d: non-finite value".into());
                }
            }
            TwoBodyPotential::Sum { terms } => {
                for t in terms {
                    out.extend(t.potential.violations(basis, x_range));
                }
            }
            _ => {}
        }
        out
    }
}

/// Cell index and fractional position of `t` on a sorted axis (clamped).
fn locate(axis: &[f64], t: f64) -> (usize, f64) {
    let last = axis.len() - 2;
    let j = match axis.partition_point(|&a| a <= t) {
        0 => 0,
        p => (p - 1).min(last),
    };
    let frac = ((t - axis[j]) / (axis[j + 1] - axis[j])).clamp(0.0, 1.0);
    (j, frac)
}

/// Composite Simpson nodes and weights over `[a, b]`, split at `breaks`.
///
/// Nodes adjacent to an interior break are nudged inside their segment so a
/// jump is integrated with the correct one-sided value.
pub(crate) struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn simpson(a: f64, b: f64, n_points: usize, breaks: &[f64]) -> Self {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut edges = vec![a];
        edges.extend(cuts);
        edges.push(b);

        let total = b - a;
        let nudge = 1e-12 * total;
        let last_seg = edges.len() - 2;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (s, w) in edges.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let mut m = (((n_points - 1) as f64 * (hi - lo) / total).ceil() as usize).max(2);
            if m % 2 == 1 {
                m += 1;
            }
            let step = (hi - lo) / m as f64;
            for k in 0..=m {
                let mut t = lo + k as f64 * step;
                if k == 0 && s > 0 {
                    t += nudge;
                }
                if k == m && s < last_seg {
                    t -= nudge;
                }
                let c = if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                nodes.push(t);
                weights.push(c * step / 3.0);
            }
        }
        Self { nodes, weights }
    }
}

/// Projects with the default `n_xi = 2001` Simpson points.
pub fn project_potential(
    spec: &TwoBodyPotential,
    basis: &BasisSet,
    grid: &Grid,
) -> Result<PotentialMatrixField> {
    project_potential_with(spec, basis, grid, DEFAULT_XI_POINTS)
}

pub fn project_potential_with(
    spec: &TwoBodyPotential,
    basis: &BasisSet,
    grid: &Grid,
    n_xi: usize,
) -> Result<PotentialMatrixField> {
    basis.check()?;
    if n_xi < 3 {
        return Err(Error::domain("quadrature needs at least 3 points"));
    }
    let problems = spec.violations(basis, (grid.x_min(), grid.x_max()));
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let n = basis.n_functions;
    if let TwoBodyPotential::Sum { terms } = spec {
        let mut acc = PotentialMatrixField::zeros(*grid, n);
        for t in terms {
            let part = project_potential_with(&t.potential, basis, grid, n_xi)?;
            acc = add_fields(&acc, &part, t.weight);
        }
        return Ok(acc);
    }
    let quad = Quadrature::simpson(basis.xi_min, basis.xi_max, n_xi, &spec.xi_breakpoints());
    let phi: Vec<Vec<f64>> = (1..=n)
        .map(|a| quad.nodes.iter().map(|&t| basis.value(a, t)).collect())
        .collect();

    let rows: Vec<Vec<f64>> = match spec {
        TwoBodyPotential::Sum { .. } => unreachable!("handled above"),
        TwoBodyPotential::SeparableProduct { f, g } => {
            let gx: Vec<f64> = quad.nodes.iter().map(|&t| g.eval(t)).collect();
            if let Some(k) = gx.iter().position(|v| !v.is_finite()) {
                return Err(Error::Quadrature {
                    x: grid.x_min(),
                    xi: quad.nodes[k],
                });
            }
            let coupling = matrix_elements(&phi, &quad.weights, &gx);
            let mut rows = Vec::with_capacity(grid.n_points());
            for i in 0..grid.n_points() {
                let x = grid.point(i);
                let fx = f.eval(x);
                if !fx.is_finite() {
                    return Err(Error::Quadrature {
                        x,
                        xi: basis.xi_min,
                    });
                }
                rows.push(coupling.iter().map(|c| fx * c).collect());
            }
            rows
        }
        _ => (0..grid.n_points())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                let vx: Vec<f64> = quad.nodes.iter().map(|&t| spec.eval(x, t)).collect();
                if let Some(k) = vx.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Quadrature {
                        x,
                        xi: quad.nodes[k],
                    });
                }
                Ok(matrix_elements(&phi, &quad.weights, &vx))
            })
            .collect::<Result<_>>()?,
    };
    PotentialMatrixField::from_upper_rows(*grid, n, &rows)
}

/// Upper triangle of `Σ_j w_j φ_α(ξ_j) v(ξ_j) φ_β(ξ_j)`, row-major.
fn matrix_elements(phi: &[Vec<f64>], weights: &[f64], v: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let wv: Vec<f64> = weights.iter().zip(v).map(|(w, v)| w * v).collect();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        let pa: Vec<f64> = phi[a].iter().zip(&wv).map(|(p, w)| p * w).collect();
        for pb in &phi[a..] {
            out.push(pa.iter().zip(pb).map(|(x, y)| x * y).sum());
        }
    }
    out
}

fn add_fields(a: &PotentialMatrixField, b: &PotentialMatrixField, wb: f64) -> PotentialMatrixField {
    let grid = *a.grid();
    let n = a.n_channels();
    let mut out = a.clone();
    for i in 0..grid.n_points() {
        for p in 0..n {
            for q in p..n {
                out.set_symmetric(i, p, q, a.get(i, p, q) + wb * b.get(i, p, q));
            }
        }
    }
    out
}

/// Everything needed to turn a 2D problem into channel form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionRecipe {
    pub basis: BasisSet,
    pub spec: TwoBodyPotential,
    #[serde(default = "default_xi_points")]
    pub n_xi: usize,
}

fn default_xi_points() -> usize {
    DEFAULT_XI_POINTS
}

impl ReductionRecipe {
    pub fn with_channels(&self, n_functions: usize) -> Self {
        let mut out = self.clone();
        out.basis.n_functions = n_functions;
        out
    }

    pub fn channels(&self) -> ChannelSet {
        ChannelSet::new(self.basis.eigenvalues())
    }

    pub fn project(&self, grid: &Grid) -> Result<PotentialMatrixField> {
        project_potential_with(&self.spec, &self.basis, grid, self.n_xi)
    }

    pub fn scenario(&self, grid: &Grid, boundary: BoundaryKind) -> Result<Scenario> {
        Ok(Scenario::new(
            self.channels(),
            self.project(grid)?,
            boundary,
        ))
    }
}

/// Gram matrix `∫ Φ_α Φ_β dξ` under the same quadrature as the projection.
pub fn overlap_matrix(basis: &BasisSet, n_xi: usize) -> DMatrix<f64> {
    let quad = Quadrature::simpson(basis.xi_min, basis.xi_max, n_xi, &[]);
    let n = basis.n_functions;
    let phi: Vec<Vec<f64>> = (1..=n)
        .map(|a| quad.nodes.iter().map(|&t| basis.value(a, t)).collect())
        .collect();
    let ones = vec![1.0; quad.nodes.len()];
    let upper = matrix_elements(&phi, &quad.weights, &ones);
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for a in 0..n {
        for b in a..n {
            m[(a, b)] = upper[k];
            m[(b, a)] = upper[k];
            k += 1;
        }
    }
    m
}
