//! Bound states from a two-sided matching determinant.
//!
//! `N` regular solutions are propagated inward from each edge. At the match
//! point `m` the `2N×2N` matrix
//!
//! ```text
//! | L(m)   -R(m)  |
//! | L'(m)  -R'(m) |
//! ```
//!
//! is singular exactly when some combination of left solutions continues
//! smoothly into a combination of right solutions. Matching the value and
//! the central difference at `m` is equivalent to the discrete Numerov
//! solutions agreeing at `m-1`, `m` and `m+1`, so eigenvalues keep the
//! fourth-order accuracy of the propagator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BoundaryKind, ChannelWavefunction, Scenario};
use crate::propagate::{propagate_set, Direction, SolutionSet};

#[derive(Clone, Debug)]
pub struct BoundStateResult {
    pub energy: f64,
    /// Normalized, largest entry positive.
    pub wavefunction: ChannelWavefunction,
    pub nodes_per_channel: Vec<usize>,
    /// Smallest singular value of the column-normalized matching matrix.
    pub matching_residual: f64,
}

/// Propagated fundamental sets and the matching matrix at one energy.
struct Matching {
    match_index: usize,
    left: SolutionSet,
    right: SolutionSet,
    /// Columns scaled to unit norm.
    matrix: DMatrix<f64>,
    col_norms: Vec<f64>,
}

impl Matching {
    fn new(s: &Scenario, energy: f64, m: usize) -> Result<Self> {
        let n = s.n_channels();
        let np = s.grid.n_points();
        if m < 1 || m + 2 > np {
            return Err(Error::domain(format!(
                "match index {m} outside 1..={}",
                np - 2
            )));
        }
        let h = s.grid.h();
        let (lf, ls) = edge_start(s, energy, Direction::LeftToRight);
        let (rf, rs) = edge_start(s, energy, Direction::RightToLeft);
        let left = propagate_set(s, energy, lf, ls, Direction::LeftToRight, m + 1)?;
        let right = propagate_set(s, energy, rf, rs, Direction::RightToLeft, m - 1)?;

        let lv = left.at(m);
        let ld = left.derivative(m, h);
        let rv = right.at(m);
        let rd = right.derivative(m, h);

        let mut matrix = DMatrix::zeros(2 * n, 2 * n);
        matrix.view_mut((0, 0), (n, n)).copy_from(lv);
        matrix.view_mut((n, 0), (n, n)).copy_from(&ld);
        matrix.view_mut((0, n), (n, n)).copy_from(&(-rv));
        matrix.view_mut((n, n), (n, n)).copy_from(&(-rd));

        let mut col_norms = Vec::with_capacity(2 * n);
        for mut col in matrix.column_iter_mut() {
            let norm = col.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Conditioning(format!(
                    "degenerate fundamental solution at E = {energy}"
                )));
            }
            col /= norm;
            col_norms.push(norm);
        }
        Ok(Self {
            match_index: m,
            left,
            right,
            matrix,
            col_norms,
        })
    }

    fn determinant(&self) -> f64 {
        self.matrix.clone().lu().determinant()
    }

    /// Singular values ascending, with the matching right singular vectors.
    fn singular_pairs(&self) -> Vec<(f64, DVector<f64>)> {
        let svd = self.matrix.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested v_t");
        let mut pairs: Vec<_> = svd
            .singular_values
            .iter()
            .enumerate()
            .map(|(k, &sv)| (sv, v_t.row(k).transpose()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }

    fn smallest_singular_value(&self) -> f64 {
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Wavefunction for null direction `z` of the normalized matrix.
    fn assemble(&self, s: &Scenario, energy: f64, z: &DVector<f64>) -> Result<ChannelWavefunction> {
        let n = s.n_channels();
        let np = s.grid.n_points();
        let a = DVector::from_fn(n, |k, _| z[k] / self.col_norms[k]);
        let b = DVector::from_fn(n, |k, _| z[n + k] / self.col_norms[n + k]);
        let mut values = Vec::with_capacity(np * n);
        for i in 0..np {
            let col = if i <= self.match_index {
                self.left.at(i) * &a
            } else {
                self.right.at(i) * &b
            };
            values.extend(col.iter());
        }
        ChannelWavefunction::new(s.grid, n, energy, values)
    }
}

/// Starting values at one edge for the regular fundamental set.
fn edge_start(s: &Scenario, energy: f64, direction: Direction) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = s.n_channels();
    let h = s.grid.h();
    let edge = match direction {
        Direction::LeftToRight => 0,
        Direction::RightToLeft => s.grid.n_points() - 1,
    };
    let mut first = DMatrix::zeros(n, n);
    let mut second = DMatrix::zeros(n, n);
    for a in 0..n {
        let kappa_sq = s.channels.threshold(a) - energy + s.potential.get(edge, a, a);
        if s.boundary == BoundaryKind::BoundDecay && kappa_sq > 0.0 {
            // decays away from the interior
            first[(a, a)] = 1.0;
            second[(a, a)] = (kappa_sq.sqrt() * h).exp();
        } else {
            second[(a, a)] = h;
        }
    }
    (first, second)
}

fn require_bound(s: &Scenario) -> Result<()> {
    s.ensure_valid()?;
    match s.boundary {
        BoundaryKind::BoundBox | BoundaryKind::BoundDecay => Ok(()),
        BoundaryKind::Scattering => Err(Error::domain(
            "bound-state search needs a bound-box or bound-decay scenario",
        )),
    }
}

/// Scale-invariant matching determinant; changes sign at simple eigenvalues.
pub fn matching_determinant(s: &Scenario, energy: f64, match_index: usize) -> Result<f64> {
    require_bound(s)?;
    Ok(Matching::new(s, energy, match_index)?.determinant())
}

/// Smallest singular value of the normalized matching matrix.
pub fn matching_residual(s: &Scenario, energy: f64, match_index: usize) -> Result<f64> {
    require_bound(s)?;
    Ok(Matching::new(s, energy, match_index)?.smallest_singular_value())
}

/// All bound states with energies in `[e_lo, e_hi]`, sorted by energy.
///
/// Simple eigenvalues are bracketed by sign changes of the determinant on a
/// scan with step `solver.e_step` and bisected. Degenerate or nearly
/// degenerate pairs leave no sign change, so local minima of the smallest
/// singular value are refined as well. The multiplicity of a root is the
/// number of singular values below `solver.singular_tol`.
pub fn find_bound_states(s: &Scenario, e_lo: f64, e_hi: f64) -> Result<Vec<BoundStateResult>> {
    require_bound(s)?;
    if !(e_lo < e_hi) {
        return Err(Error::domain(format!(
            "energy window needs e_lo < e_hi, got [{e_lo}, {e_hi}]"
        )));
    }
    let m = s.match_index();
    let cfg = &s.solver;
    let cells = ((e_hi - e_lo) / cfg.e_step).ceil().max(1.0) as usize;
    let energies: Vec<f64> = (0..=cells)
        .map(|k| e_lo + (e_hi - e_lo) * k as f64 / cells as f64)
        .collect();
    let samples: Vec<(f64, f64)> = energies
        .par_iter()
        .map(|&e| {
            let mt = Matching::new(s, e, m)?;
            Ok((mt.determinant(), mt.smallest_singular_value()))
        })
        .collect::<Result<_>>()?;

    let changes = |k: usize| samples[k].0.signum() != samples[k + 1].0.signum();

    let mut brackets = Vec::new();
    for k in 0..cells {
        if samples[k].0 == 0.0 {
            brackets.push(Bracket::Exact(energies[k]));
        } else if samples[k + 1].0 != 0.0 && changes(k) {
            brackets.push(Bracket::Sign(energies[k], energies[k + 1]));
        }
    }
    if samples[cells].0 == 0.0 {
        brackets.push(Bracket::Exact(energies[cells]));
    }
    for k in 1..cells {
        let local_min = samples[k].1 <= samples[k - 1].1 && samples[k].1 <= samples[k + 1].1;
        if local_min && !changes(k - 1) && !changes(k) && samples[k].0 != 0.0 {
            brackets.push(Bracket::Minimum(energies[k - 1], energies[k + 1]));
        }
    }

    let found: Vec<Vec<f64>> = brackets
        .par_iter()
        .map(|b| refine(s, m, b))
        .collect::<Result<_>>()?;
    let mut roots: Vec<f64> = found.into_iter().flatten().collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);

    let states: Vec<Vec<BoundStateResult>> = roots
        .par_iter()
        .map(|&e| states_at(s, e, m))
        .collect::<Result<_>>()?;
    let mut out: Vec<BoundStateResult> = states.into_iter().flatten().collect();
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

enum Bracket {
    Exact(f64),
    Sign(f64, f64),
    Minimum(f64, f64),
}

fn refine(s: &Scenario, m: usize, bracket: &Bracket) -> Result<Vec<f64>> {
    match *bracket {
        Bracket::Exact(e) => Ok(vec![e]),
        Bracket::Sign(a, b) => Ok(vec![bisect(s, m, a, b)?]),
        Bracket::Minimum(a, b) => {
            let (root, sigma) = golden_minimum(s, m, a, b)?;
            if sigma >= s.solver.singular_tol {
                return Ok(Vec::new());
            }
            let mut roots = vec![root];
            // An even number of roots may hide in [a, b]; look beside the one found.
            let eta = 1e-7;
            let det = |e: f64| Matching::new(s, e, m).map(|mt| mt.determinant());
            let (da, db) = (det(a)?, det(b)?);
            if root - eta > a && det(root - eta)?.signum() != da.signum() {
                roots.push(bisect(s, m, a, root - eta)?);
            }
            if root + eta < b && det(root + eta)?.signum() != db.signum() {
                roots.push(bisect(s, m, root + eta, b)?);
            }
            Ok(roots)
        }
    }
}

fn bisect(s: &Scenario, m: usize, mut a: f64, mut b: f64) -> Result<f64> {
    let det = |e: f64| Matching::new(s, e, m).map(|mt| mt.determinant());
    let mut fa = det(a)?;
    for _ in 0..s.solver.max_iterations {
        if b - a <= s.solver.energy_tol {
            return Ok(0.5 * (a + b));
        }
        let mid = 0.5 * (a + b);
        let fm = det(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "bisection",
        iterations: s.solver.max_iterations,
    })
}

fn golden_minimum(s: &Scenario, m: usize, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let sigma = |e: f64| Matching::new(s, e, m).map(|mt| mt.smallest_singular_value());
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = sigma(c)?;
    let mut fd = sigma(d)?;
    for _ in 0..s.solver.max_iterations {
        if b - a <= s.solver.energy_tol {
            let e = 0.5 * (a + b);
            return Ok((e, sigma(e)?));
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = sigma(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = sigma(d)?;
        }
    }
    Err(Error::NoConvergence {
        what: "golden-section search",
        iterations: s.solver.max_iterations,
    })
}

/// Reconstructs every state belonging to the root at `energy`.
fn states_at(s: &Scenario, energy: f64, m: usize) -> Result<Vec<BoundStateResult>> {
    let mt = Matching::new(s, energy, m)?;
    let pairs = mt.singular_pairs();
    let residual = pairs[0].0;
    let multiplicity = pairs
        .iter()
        .take_while(|(sv, _)| *sv < s.solver.singular_tol)
        .count()
        .max(1);

    let mut basis: Vec<ChannelWavefunction> = Vec::with_capacity(multiplicity);
    for (_, z) in pairs.iter().take(multiplicity) {
        let mut psi = mt.assemble(s, energy, z)?;
        for prev in &basis {
            let c = psi.overlap(prev);
            psi.subtract_scaled(prev, c);
        }
        psi.normalize()?;
        basis.push(psi);
    }
    Ok(basis
        .into_iter()
        .map(|mut psi| {
            psi.fix_sign();
            BoundStateResult {
                energy,
                nodes_per_channel: count_nodes(&psi),
                wavefunction: psi,
                matching_residual: residual,
            }
        })
        .collect())
}

/// Per-channel count of strict sign changes, skipping `|Ψ_α| < 1e-12 max|Ψ_α|`.
pub fn count_nodes(psi: &ChannelWavefunction) -> Vec<usize> {
    (0..psi.n_channels())
        .map(|a| {
            let floor = 1e-12 * psi.max_abs(a);
            let mut last_sign = 0.0;
            let mut nodes = 0;
            for i in 0..psi.grid().n_points() {
                let v = psi.get(i, a);
                if v.abs() < floor || v == 0.0 {
                    continue;
                }
                let sign = v.signum();
                if last_sign != 0.0 && sign != last_sign {
                    nodes += 1;
                }
                last_sign = sign;
            }
            nodes
        })
        .collect()
}

/// Lower bound on any bound-state energy: the smallest eigenvalue of
/// `diag(ε) + V(x_i)` over the grid.
pub fn energy_floor(s: &Scenario) -> f64 {
    let n = s.n_channels();
    (0..s.grid.n_points())
        .map(|i| {
            let mut v = s.potential.matrix(i);
            for a in 0..n {
                v[(a, a)] += s.channels.threshold(a);
            }
            SymmetricEigen::new(v).eigenvalues.min()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Lowest bound state, found by scanning upward from [`energy_floor`].
pub fn ground_state(s: &Scenario) -> Result<BoundStateResult> {
    require_bound(s)?;
    let kinetic = match s.boundary {
        BoundaryKind::BoundBox => (std::f64::consts::PI / s.grid.length()).powi(2),
        _ => 0.0,
    };
    let width = (4.0 * kinetic).max(1.0);
    let mut lo = energy_floor(s) + 0.5 * kinetic;
    for _ in 0..40 {
        let hi = lo + width;
        if let Some(first) = find_bound_states(s, lo, hi)?.into_iter().next() {
            return Ok(first);
        }
        lo = hi;
    }
    Err(Error::NoConvergence {
        what: "ground-state window search",
        iterations: 40,
    })
}
