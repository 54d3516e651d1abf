//! Core domain types shared by every solver.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points when a scenario does not specify one.
pub const DEFAULT_POINTS: usize = 2001;

/// Uniform discretization of the propagation coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    h: f64,
}

/// Builds a uniform grid. Fails unless `x_min < x_max` and `n_points >= 3`.
pub fn build_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n_points)
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::domain("grid bounds must be finite"));
        }
        if !(x_min < x_max) {
            return Err(Error::domain(format!(
                "grid requires x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 3 {
            return Err(Error::domain(format!(
                "grid requires at least 3 points, got {n_points}"
            )));
        }
        let h = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_points,
            h,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Trapezoid weight of point `i`: `h` inside, `h/2` at the two ends.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Index of the grid point closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.h).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Same grid up to a relative tolerance on the bounds.
    pub fn same_as(&self, other: &Grid) -> bool {
        let scale = self.x_min.abs().max(self.x_max.abs()).max(1.0);
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * scale
            && (self.x_max - other.x_max).abs() <= 1e-12 * scale
    }
}

/// Channel count and threshold energies `ε_α`, so that `E_α = E - ε_α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    thresholds: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ChannelSet {
    /// Construction is permissive; ordering is checked by [`validate_scenario`].
    pub fn new(thresholds: Vec<f64>) -> Self {
        Self {
            thresholds,
            labels: None,
        }
    }

    /// `n` channels with all thresholds at zero.
    pub fn degenerate(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn n_channels(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn threshold(&self, alpha: usize) -> f64 {
        self.thresholds[alpha]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name of channel `alpha` (0-based), defaulting to its 1-based number.
    pub fn label(&self, alpha: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.get(alpha).cloned())
            .unwrap_or_else(|| (alpha + 1).to_string())
    }

    pub fn channel_energy(&self, energy: f64, alpha: usize) -> f64 {
        energy - self.thresholds[alpha]
    }

    pub fn is_sorted(&self) -> bool {
        self.thresholds.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Real `N×N` interaction matrix `V_αβ(x_i)` tabulated on a grid.
///
/// Storage is dense and row-major per point. Builders in this crate always
/// produce symmetric data; [`PotentialMatrixField::from_matrices`] accepts
/// anything so that asymmetric input can be reported by validation.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialMatrixField {
    grid: Grid,
    n: usize,
    values: Vec<f64>,
}

impl PotentialMatrixField {
    pub fn zeros(grid: Grid, n: usize) -> Self {
        Self {
            grid,
            n,
            values: vec![0.0; grid.n_points() * n * n],
        }
    }

    /// Fills the upper triangle from `f(x, alpha, beta)` with `alpha <= beta`
    /// and mirrors it.
    pub fn from_fn(grid: Grid, n: usize, f: impl Fn(f64, usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(grid, n);
        for i in 0..grid.n_points() {
            let x = grid.point(i);
            for a in 0..n {
                for b in a..n {
                    field.set_symmetric(i, a, b, f(x, a, b));
                }
            }
        }
        field
    }

    /// One full matrix per grid point; symmetry is not enforced here.
    pub fn from_matrices(grid: Grid, matrices: &[DMatrix<f64>]) -> Result<Self> {
        if matrices.len() != grid.n_points() {
            return Err(Error::domain(format!(
                "expected {} matrices, got {}",
                grid.n_points(),
                matrices.len()
            )));
        }
        let n = matrices.first().map_or(0, |m| m.nrows());
        let mut values = Vec::with_capacity(grid.n_points() * n * n);
        for (i, m) in matrices.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::domain(format!(
                    "matrix at i={i} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for a in 0..n {
                for b in 0..n {
                    values.push(m[(a, b)]);
                }
            }
        }
        Ok(Self { grid, n, values })
    }

    /// Rows hold the upper triangle `V_11, V_12, ..., V_1N, V_22, ..., V_NN`.
    pub fn from_upper_rows(grid: Grid, n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let expected = n * (n + 1) / 2;
        if rows.len() != grid.n_points() {
            return Err(Error::domain(format!(
                "expected {} rows, got {}",
                grid.n_points(),
                rows.len()
            )));
        }
        let mut field = Self::zeros(grid, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != expected {
                return Err(Error::domain(format!(
                    "row {i} has {} entries, expected {expected}",
                    row.len()
                )));
            }
            let mut k = 0;
            for a in 0..n {
                for b in a..n {
                    field.set_symmetric(i, a, b, row[k]);
                    k += 1;
                }
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, a: usize, b: usize) -> f64 {
        self.values[(i * self.n + a) * self.n + b]
    }

    pub fn set_symmetric(&mut self, i: usize, a: usize, b: usize, v: f64) {
        let n = self.n;
        self.values[(i * n + a) * n + b] = v;
        self.values[(i * n + b) * n + a] = v;
    }

    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.get(i, a, b))
    }

    /// Upper triangle at point `i`, row-major.
    pub fn upper_row(&self, i: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for a in 0..self.n {
            for b in a..self.n {
                row.push(self.get(i, a, b));
            }
        }
        row
    }

    /// Adds `c` to every diagonal entry at every point.
    pub fn shift_diagonal(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.grid.n_points() {
            for a in 0..self.n {
                out.values[(i * self.n + a) * self.n + a] += c;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Mirror image `x -> x_min + x_max - x` on the same grid.
    pub fn reflected(&self) -> Self {
        let np = self.grid.n_points();
        let block = self.n * self.n;
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..np).rev() {
            values.extend_from_slice(&self.values[i * block..(i + 1) * block]);
        }
        Self {
            grid: self.grid,
            n: self.n,
            values,
        }
    }

    /// Index of every point where the stored matrix is not exactly symmetric.
    pub fn asymmetric_points(&self) -> Vec<usize> {
        (0..self.grid.n_points())
            .filter(|&i| {
                (0..self.n).any(|a| (a + 1..self.n).any(|b| self.get(i, a, b) != self.get(i, b, a)))
            })
            .collect()
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        let block = self.n * self.n;
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| k / block.max(1))
    }
}

/// Vector-valued solution `Ψ_α(x_i)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelWavefunction {
    grid: Grid,
    n: usize,
    energy: f64,
    values: Vec<f64>,
    normalized: bool,
}

impl ChannelWavefunction {
    /// `values` is point-major: `values[i * n + alpha]`.
    pub fn new(grid: Grid, n: usize, energy: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() * n {
            return Err(Error::domain(format!(
                "wavefunction needs {} entries, got {}",
                grid.n_points() * n,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Conditioning(format!(
                "non-finite wavefunction value at i={}",
                k / n.max(1)
            )));
        }
        Ok(Self {
            grid,
            n,
            energy,
            values,
            normalized: false,
        })
    }

    /// Builds from per-channel component arrays.
    pub fn from_components(grid: Grid, energy: f64, components: &[Vec<f64>]) -> Result<Self> {
        let n = components.len();
        let np = grid.n_points();
        if components.iter().any(|c| c.len() != np) {
            return Err(Error::domain(format!("every component needs {np} samples")));
        }
        let values = (0..np)
            .flat_map(|i| components.iter().map(move |c| c[i]))
            .collect();
        Self::new(grid, n, energy, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.n
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn get(&self, i: usize, alpha: usize) -> f64 {
        self.values[i * self.n + alpha]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, alpha: usize) -> Vec<f64> {
        (0..self.grid.n_points())
            .map(|i| self.get(i, alpha))
            .collect()
    }

    pub fn max_abs(&self, alpha: usize) -> f64 {
        (0..self.grid.n_points())
            .map(|i| self.get(i, alpha).abs())
            .fold(0.0, f64::max)
    }

    /// Trapezoid-weighted inner product summed over channels.
    pub fn overlap(&self, other: &ChannelWavefunction) -> f64 {
        (0..self.grid.n_points())
            .map(|i| {
                let w = self.grid.trapezoid_weight(i);
                let s: f64 = (0..self.n).map(|a| self.get(i, a) * other.get(i, a)).sum();
                w * s
            })
            .sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.overlap(self)
    }

    /// Rescales to unit trapezoid norm and flags the result as normalized.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_squared().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Conditioning(format!(
                "cannot normalize wavefunction with norm {norm}"
            )));
        }
        self.values.iter_mut().for_each(|v| *v /= norm);
        self.normalized = true;
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.normalized = self.normalized && (s.abs() - 1.0).abs() < 1e-15;
        out
    }

    /// Copy with component `alpha` multiplied by -1.
    pub fn flip_component(&self, alpha: usize) -> Self {
        let mut out = self.clone();
        for i in 0..self.grid.n_points() {
            out.values[i * self.n + alpha] = -out.values[i * self.n + alpha];
        }
        out
    }

    /// `self - c * other`, used for Gram-Schmidt.
    pub(crate) fn subtract_scaled(&mut self, other: &ChannelWavefunction, c: f64) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v -= c * o;
        }
        self.normalized = false;
    }

    /// Flips the global sign so the largest-magnitude entry is positive.
    pub(crate) fn fix_sign(&mut self) {
        let mut best = 0.0f64;
        for &v in &self.values {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            self.values.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Dirichlet walls at both grid ends.
    BoundBox,
    /// Exponentially decaying edge data in closed channels.
    BoundDecay,
    /// Plane-wave asymptotics in open channels.
    Scattering,
}

/// Numerical controls shared by the bound-state and scattering solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Energy scan step for bracketing.
    pub e_step: f64,
    /// Bisection stops when the bracket is narrower than this.
    pub energy_tol: f64,
    pub max_iterations: usize,
    /// Match point index; the grid midpoint when absent.
    pub match_index: Option<usize>,
    /// Singular values of the normalized matching matrix below this count as zero.
    pub singular_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            e_step: 0.05,
            energy_tol: 1e-10,
            max_iterations: 200,
            match_index: None,
            singular_tol: 1e-6,
        }
    }
}

/// Everything a solver needs: grid, channels, potential, boundary kind and controls.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub channels: ChannelSet,
    pub potential: PotentialMatrixField,
    pub boundary: BoundaryKind,
    pub solver: SolverSettings,
}

impl Scenario {
    pub fn new(
        channels: ChannelSet,
        potential: PotentialMatrixField,
        boundary: BoundaryKind,
    ) -> Self {
        Self {
            grid: *potential.grid(),
            channels,
            potential,
            boundary,
            solver: SolverSettings::default(),
        }
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.channels.n_channels()
    }

    /// Returns `Err(Validation)` listing every violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_scenario(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// Same scenario with `c` added to all diagonal potentials.
    pub fn with_diagonal_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.potential = self.potential.shift_diagonal(c);
        out
    }

    /// Same scenario mirrored through the grid center.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.potential = self.potential.reflected();
        out
    }

    pub fn match_index(&self) -> usize {
        self.solver.match_index.unwrap_or(self.grid.n_points() / 2)
    }
}

/// Fraction of grid points at each end that must be flat for scattering.
pub const FLAT_EDGE_FRACTION: f64 = 0.05;
const FLATNESS_TOL: f64 = 1e-10;

/// Lists every violated invariant; empty means the scenario is usable.
pub fn validate_scenario(s: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    let n = s.channels.n_channels();
    if n == 0 {
        out.push("channels: n_channels must be at least 1".to_string());
    }
    if s.potential.n_channels() != n {
        out.push(format!(
            "potential: has {} channels but thresholds list {}",
            s.potential.n_channels(),
            n
        ));
    }
    if let Some(labels) = s.channels.labels() {
        if labels.len() != n {
            out.push(format!(
                "channels: {} labels for {} channels",
                labels.len(),
                n
            ));
        }
    }
    if s.channels.thresholds().iter().any(|t| !t.is_finite()) {
        out.push("thresholds not finite".to_string());
    }
    if !s.channels.is_sorted() {
        out.push("thresholds not sorted".to_string());
    }
    if !s.grid.same_as(s.potential.grid()) {
        out.push("potential: grid differs from scenario grid".to_string());
    }
    if let Some(i) = s.potential.first_non_finite() {
        out.push(format!("potential not finite at i={i}"));
    }
    for i in s.potential.asymmetric_points() {
        out.push(format!("potential not symmetric at i={i}"));
    }
    if s.boundary == BoundaryKind::Scattering && s.potential.n_channels() == n {
        check_flat_edges(s, &mut out);
    }
    let sv = &s.solver;
    if !(sv.e_step > 0.0) {
        out.push("solver: e_step must be positive".to_string());
    }
    if !(sv.energy_tol > 0.0) {
        out.push("solver: energy_tol must be positive".to_string());
    }
    if !(sv.singular_tol > 0.0) {
        out.push("solver: singular_tol must be positive".to_string());
    }
    if sv.max_iterations == 0 {
        out.push("solver: max_iterations must be positive".to_string());
    }
    if let Some(m) = sv.match_index {
        if m < 1 || m + 2 > s.grid.n_points() {
            out.push(format!(
                "solver: match_index {m} outside 1..={}",
                s.grid.n_points().saturating_sub(2)
            ));
        }
    }
    out
}

fn check_flat_edges(s: &Scenario, out: &mut Vec<String>) {
    let np = s.grid.n_points();
    let n = s.n_channels();
    let edge = ((np as f64 * FLAT_EDGE_FRACTION).ceil() as usize).max(2);
    let field = &s.potential;
    let spans = [("left", 0..edge, 0), ("right", np - edge..np, np - 1)];
    for (side, range, anchor) in spans {
        'pairs: for a in 0..n {
            for b in a..n {
                let v0 = field.get(anchor, a, b);
                if range
                    .clone()
                    .any(|i| (field.get(i, a, b) - v0).abs() > FLATNESS_TOL)
                {
                    out.push(format!(
                        "potential not asymptotically flat at {side} edge ({},{})",
                        a + 1,
                        b + 1
                    ));
                    break 'pairs;
                }
            }
        }
    }
}

/// Row-major flattening of a multi-index.
pub fn flatten_channel_index(multi: &[usize], dims: &[usize]) -> Result<usize> {
    if multi.len() != dims.len() {
        return Err(Error::domain(format!(
            "multi-index has {} components, dims has {}",
            multi.len(),
            dims.len()
        )));
    }
    let mut flat = 0usize;
    for (k, (&m, &d)) in multi.iter().zip(dims).enumerate() {
        if m >= d {
            return Err(Error::domain(format!(
                "component {k} = {m} out of range 0..{d}"
            )));
        }
        flat = flat * d + m;
    }
    Ok(flat)
}

/// Inverse of [`flatten_channel_index`].
pub fn unflatten_channel_index(flat: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if flat >= total {
        return Err(Error::domain(format!(
            "flat index {flat} out of range 0..{total}"
        )));
    }
    let mut rest = flat;
    let mut multi = vec![0; dims.len()];
    for (k, &d) in dims.iter().enumerate().rev() {
        multi[k] = rest % d;
        rest /= d;
    }
    Ok(multi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn box_scenario() -> Scenario {
        let grid = build_grid(0.0, PI, 101).unwrap();
        let field =
            PotentialMatrixField::from_fn(grid, 2, |_, a, b| if a == b { 0.0 } else { 0.5 });
        Scenario::new(ChannelSet::degenerate(2), field, BoundaryKind::BoundBox)
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(0.0, PI, 1001).unwrap();
        assert!((g.h() - PI / 1000.0).abs() < 1e-16);
        assert!((g.point(1000) - PI).abs() <= 1e-12 * PI);

        let g = build_grid(0.0, 1.0, 3).unwrap();
        assert_eq!(g.points(), vec![0.0, 0.5, 1.0]);

        assert!(matches!(build_grid(1.0, 0.0, 10), Err(Error::Domain(_))));
        assert!(matches!(build_grid(0.0, 1.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_spacing_is_uniform() {
        let g = build_grid(-20.0, 20.0, 4001).unwrap();
        for i in 0..g.n_points() - 1 {
            assert!((g.point(i + 1) - g.point(i) - g.h()).abs() <= 1e-14);
        }
    }

    #[test]
    fn well_formed_scenario_has_no_violations() {
        assert!(validate_scenario(&box_scenario()).is_empty());
    }

    #[test]
    fn unsorted_thresholds_are_reported() {
        let mut s = box_scenario();
        s.channels = ChannelSet::new(vec![4.0, 1.0]);
        assert_eq!(
            validate_scenario(&s),
            vec!["thresholds not sorted".to_string()]
        );
    }

    #[test]
    fn asymmetric_point_is_reported() {
        let s = box_scenario();
        let mut mats: Vec<_> = (0..s.grid.n_points())
            .map(|i| s.potential.matrix(i))
            .collect();
        mats[17][(0, 1)] = 0.25;
        let mut bad = s.clone();
        bad.potential = PotentialMatrixField::from_matrices(s.grid, &mats).unwrap();
        let v = validate_scenario(&bad);
        assert_eq!(v, vec!["potential not symmetric at i=17".to_string()]);
        // idempotent and side-effect free
        assert_eq!(validate_scenario(&bad), v);
    }

    #[test]
    fn scattering_requires_flat_edges() {
        let grid = build_grid(-5.0, 5.0, 201).unwrap();
        let field = PotentialMatrixField::from_fn(grid, 1, |x, _, _| 0.1 * x);
        let s = Scenario::new(ChannelSet::degenerate(1), field, BoundaryKind::Scattering);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v[0].contains("left edge"));
    }

    #[test]
    fn flatten_examples() {
        assert_eq!(flatten_channel_index(&[0, 0], &[2, 3]).unwrap(), 0);
        assert_eq!(flatten_channel_index(&[1, 2], &[2, 3]).unwrap(), 5);
        assert!(flatten_channel_index(&[2, 0], &[2, 3]).is_err());
    }

    #[test]
    fn flatten_round_trip_exhaustive() {
        for dims in [
            vec![4],
            vec![4, 4],
            vec![4, 4, 4],
            vec![2, 3, 4],
            vec![1, 4, 2],
        ] {
            let total: usize = dims.iter().product();
            for flat in 0..total {
                let m = unflatten_channel_index(flat, &dims).unwrap();
                assert_eq!(flatten_channel_index(&m, &dims).unwrap(), flat);
            }
            assert!(unflatten_channel_index(total, &dims).is_err());
        }
    }

    #[test]
    fn normalization_uses_trapezoid_weights() {
        let g = build_grid(0.0, PI, 2001).unwrap();
        let c: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let mut psi = ChannelWavefunction::from_components(g, 1.0, &[c.clone(), c]).unwrap();
        psi.normalize().unwrap();
        assert!(psi.is_normalized());
        assert!((psi.norm_squared() - 1.0).abs() < 1e-12);
    }
}
