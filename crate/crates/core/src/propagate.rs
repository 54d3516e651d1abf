//! Matrix Numerov integration of `Ψ'' = -T(x) Ψ`.
//!
//! With `T_αβ = (E - ε_α) δ_αβ - V_αβ(x)` and `g = h²/12`, each step solves
//!
//! ```text
//! (I + g T_{i+1}) Ψ_{i+1} = 2 (I - 5 g T_i) Ψ_i - (I + g T_{i-1}) Ψ_{i-1}
//! ```
//!
//! for the next point. The recurrence is evaluated in its summed form
//! (`u = (I + gT)Ψ` and its first difference are accumulated with
//! compensation), which is algebraically the same three-term relation but
//! keeps roundoff at a few ulps instead of growing like `n²·eps`.
//!
//! Several solutions are carried at once as the columns of an `N×K` matrix,
//! so a fundamental set costs one LU per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ChannelWavefunction, Scenario};

/// Largest channel count propagated without stabilization.
pub const MAX_CHANNELS: usize = 8;
/// Largest domain length propagated without stabilization.
pub const MAX_DOMAIN_LENGTH: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

/// `T(x_i)`, so that the coupled equations read `Ψ'' = -T Ψ`.
pub fn local_coupling_matrix(s: &Scenario, energy: f64, i: usize) -> DMatrix<f64> {
    let n = s.n_channels();
    let mut t = DMatrix::zeros(n, n);
    fill_coupling(s, energy, i, &mut t);
    t
}

fn fill_coupling(s: &Scenario, energy: f64, i: usize, t: &mut DMatrix<f64>) {
    let n = s.n_channels();
    for a in 0..n {
        for b in 0..n {
            let v = s.potential.get(i, a, b);
            t[(a, b)] = if a == b {
                s.channels.channel_energy(energy, a) - v
            } else {
                -v
            };
        }
    }
}

/// Values of a set of solutions (matrix columns) over a contiguous index range.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    first: usize,
    values: Vec<DMatrix<f64>>,
}

impl SolutionSet {
    /// Lowest grid index held.
    pub fn first_index(&self) -> usize {
        self.first
    }

    /// Highest grid index held.
    pub fn last_index(&self) -> usize {
        self.first + self.values.len() - 1
    }

    pub fn at(&self, i: usize) -> &DMatrix<f64> {
        &self.values[i - self.first]
    }

    pub fn n_columns(&self) -> usize {
        self.values[0].ncols()
    }

    /// Central difference `(Ψ_{i+1} - Ψ_{i-1}) / 2h`.
    pub fn derivative(&self, i: usize, h: f64) -> DMatrix<f64> {
        (self.at(i + 1) - self.at(i - 1)) / (2.0 * h)
    }
}

/// Running matrix sum with an error-free (TwoSum) compensation term.
struct Compensated {
    hi: DMatrix<f64>,
    lo: DMatrix<f64>,
}

impl Compensated {
    fn new(value: DMatrix<f64>) -> Self {
        let lo = DMatrix::zeros(value.nrows(), value.ncols());
        Self { hi: value, lo }
    }

    fn add(&mut self, x: &DMatrix<f64>) {
        for ((hi, lo), &x) in self.hi.iter_mut().zip(self.lo.iter_mut()).zip(x.iter()) {
            let b = x + *lo;
            let s = *hi + b;
            let bb = s - *hi;
            *lo = (*hi - (s - bb)) + (b - bb);
            *hi = s;
        }
    }

    fn value(&self) -> DMatrix<f64> {
        &self.hi + &self.lo
    }
}

/// Refuses problem sizes where unstabilized closed-channel growth is not trusted.
pub fn check_limits(s: &Scenario) -> Result<()> {
    if s.n_channels() > MAX_CHANNELS {
        return Err(Error::Conditioning(format!(
            "{} channels exceeds the unstabilized limit of {MAX_CHANNELS}",
            s.n_channels()
        )));
    }
    if s.grid.length() > MAX_DOMAIN_LENGTH {
        return Err(Error::Conditioning(format!(
            "domain length {} exceeds the unstabilized limit of {MAX_DOMAIN_LENGTH}",
            s.grid.length()
        )));
    }
    Ok(())
}

/// Propagates the columns of `first` (at the starting edge) and `second`
/// (one step inward) until grid index `stop` is reached.
///
/// The starting edge is index 0 for [`Direction::LeftToRight`] and the last
/// index for [`Direction::RightToLeft`].
pub fn propagate_set(
    s: &Scenario,
    energy: f64,
    first: DMatrix<f64>,
    second: DMatrix<f64>,
    direction: Direction,
    stop: usize,
) -> Result<SolutionSet> {
    check_limits(s)?;
    let n = s.n_channels();
    let np = s.grid.n_points();
    if first.nrows() != n || second.nrows() != n || first.ncols() != second.ncols() {
        return Err(Error::domain(
            "initial data shape does not match the channel count",
        ));
    }
    if stop >= np {
        return Err(Error::domain(format!("stop index {stop} outside grid")));
    }
    let index = |k: usize| match direction {
        Direction::LeftToRight => k,
        Direction::RightToLeft => np - 1 - k,
    };
    let steps = match direction {
        Direction::LeftToRight => stop + 1,
        Direction::RightToLeft => np - stop,
    }
    .max(2);

    let h = s.grid.h();
    let h2 = h * h;
    let g = h2 / 12.0;
    let eye = DMatrix::<f64>::identity(n, n);

    let mut t_cur = local_coupling_matrix(s, energy, index(1));
    let mut t_next = DMatrix::zeros(n, n);

    // Summed form: u = (I + gT) ψ, Δ_k = u_{k+1} - u_k, Δ_k = Δ_{k-1} - h² T_k ψ_k.
    // Both running sums carry a compensation term.
    let u0 = (&eye + local_coupling_matrix(s, energy, index(0)) * g) * &first;
    let u1 = (&eye + &t_cur * g) * &second;
    let mut u = Compensated::new(u1.clone());
    let mut delta = Compensated::new(u1 - u0);

    let mut values = Vec::with_capacity(steps);
    values.push(first);
    values.push(second);

    for k in 1..steps - 1 {
        let i_next = index(k + 1);
        fill_coupling(s, energy, i_next, &mut t_next);

        let increment = (&t_cur * &values[k]) * (-h2);
        delta.add(&increment);
        u.add(&delta.value());

        let a_next = &eye + &t_next * g;
        let lu = a_next.lu();
        let u_diag = lu.u().diagonal();
        let pivot_max = u_diag.amax();
        let pivot_min = u_diag.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
        if !(pivot_min > 1e-13 * pivot_max.max(1.0)) {
            return Err(Error::SingularStep { step: i_next });
        }
        let next = lu
            .solve(&u.value())
            .ok_or(Error::SingularStep { step: i_next })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning(format!(
                "solution overflow at step {i_next}"
            )));
        }
        values.push(next);
        std::mem::swap(&mut t_cur, &mut t_next);
    }

    if direction == Direction::RightToLeft {
        values.reverse();
    }
    let first_index = match direction {
        Direction::LeftToRight => 0,
        Direction::RightToLeft => np - values.len(),
    };
    Ok(SolutionSet {
        first: first_index,
        values,
    })
}

/// Sweeps one solution across the whole grid from two starting values.
///
/// `init.0` sits at the starting edge, `init.1` one step inward.
pub fn numerov_sweep(
    s: &Scenario,
    energy: f64,
    init: (&DVector<f64>, &DVector<f64>),
    direction: Direction,
) -> Result<ChannelWavefunction> {
    let n = s.n_channels();
    let np = s.grid.n_points();
    let first = DMatrix::from_column_slice(n, 1, init.0.as_slice());
    let second = DMatrix::from_column_slice(n, 1, init.1.as_slice());
    let stop = match direction {
        Direction::LeftToRight => np - 1,
        Direction::RightToLeft => 0,
    };
    let set = propagate_set(s, energy, first, second, direction, stop)?;
    let values = (0..np)
        .flat_map(|i| set.at(i).column(0).iter().copied().collect::<Vec<_>>())
        .collect();
    ChannelWavefunction::new(s.grid, n, energy, values)
}

/// Central-difference derivative of every channel at interior point `i`.
pub fn derivative_at(psi: &ChannelWavefunction, i: usize) -> Result<DVector<f64>> {
    let np = psi.grid().n_points();
    if i == 0 || i + 1 >= np {
        return Err(Error::domain(format!(
            "derivative needs 1 <= i <= {}, got {i}",
            np - 2
        )));
    }
    let h = psi.grid().h();
    Ok(DVector::from_fn(psi.n_channels(), |a, _| {
        (psi.get(i + 1, a) - psi.get(i - 1, a)) / (2.0 * h)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, BoundaryKind, ChannelSet, PotentialMatrixField};
    use std::f64::consts::PI;

    fn free(n_points: usize) -> Scenario {
        let grid = build_grid(0.0, PI, n_points).unwrap();
        Scenario::new(
            ChannelSet::degenerate(1),
            PotentialMatrixField::zeros(grid, 1),
            BoundaryKind::BoundBox,
        )
    }

    #[test]
    fn coupling_matrix_examples() {
        let t = local_coupling_matrix(&free(11), 1.0, 3);
        assert_eq!(t[(0, 0)], 1.0);

        let grid = build_grid(0.0, 1.0, 5).unwrap();
        let field = PotentialMatrixField::from_fn(grid, 2, |_, a, b| match (a, b) {
            (0, 0) => 1.0,
            (1, 1) => 2.0,
            _ => 0.5,
        });
        let s = Scenario::new(
            ChannelSet::new(vec![0.0, 4.0]),
            field,
            BoundaryKind::BoundBox,
        );
        let t = local_coupling_matrix(&s, 5.0, 2);
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[4.0, -0.5, -0.5, -1.0]));

        let s = Scenario::new(
            ChannelSet::new(vec![1.5, 4.0]),
            PotentialMatrixField::zeros(grid, 2),
            BoundaryKind::BoundBox,
        );
        let t = local_coupling_matrix(&s, 1.5, 0);
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.5]));
    }

    #[test]
    fn free_wave_reaches_one_at_half_pi() {
        let s = free(1001);
        let h = s.grid.h();
        let a = DVector::from_element(1, 0.0);
        let b = DVector::from_element(1, h.sin());
        let psi = numerov_sweep(&s, 1.0, (&a, &b), Direction::LeftToRight).unwrap();
        assert!((psi.get(500, 0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn right_to_left_mirrors_left_to_right() {
        let s = free(1001);
        let h = s.grid.h();
        let a = DVector::from_element(1, 0.0);
        let b = DVector::from_element(1, h.sin());
        let l = numerov_sweep(&s, 1.0, (&a, &b), Direction::LeftToRight).unwrap();
        let r = numerov_sweep(&s, 1.0, (&a, &b), Direction::RightToLeft).unwrap();
        for i in 0..1001 {
            assert!((l.get(i, 0) - r.get(1000 - i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        let g = build_grid(0.0, PI, 2001).unwrap();
        let sin: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let psi = ChannelWavefunction::from_components(g, 1.0, &[sin]).unwrap();
        assert!(derivative_at(&psi, 1000).unwrap()[0].abs() < 1e-6);

        let ramp = ChannelWavefunction::from_components(g, 0.0, &[g.points()]).unwrap();
        assert!((derivative_at(&ramp, 700).unwrap()[0] - 1.0).abs() < 1e-12);

        assert!(matches!(derivative_at(&psi, 0), Err(Error::Domain(_))));
        assert!(matches!(derivative_at(&psi, 2000), Err(Error::Domain(_))));
    }

    #[test]
    fn oversized_step_is_reported() {
        // 1 + g T = 0 at T = -12/h²
        let grid = build_grid(0.0, 1.0, 11).unwrap();
        let h = grid.h();
        let v = 12.0 / (h * h);
        let field = PotentialMatrixField::from_fn(grid, 1, |_, _, _| v);
        let s = Scenario::new(ChannelSet::degenerate(1), field, BoundaryKind::BoundBox);
        let a = DVector::from_element(1, 0.0);
        let b = DVector::from_element(1, h);
        let err = numerov_sweep(&s, 0.0, (&a, &b), Direction::LeftToRight).unwrap_err();
        assert!(matches!(err, Error::SingularStep { step: 2 }), "{err:?}");
    }

    #[test]
    fn refuses_long_domains() {
        let grid = build_grid(0.0, 50.0, 101).unwrap();
        let s = Scenario::new(
            ChannelSet::degenerate(1),
            PotentialMatrixField::zeros(grid, 1),
            BoundaryKind::BoundBox,
        );
        let a = DVector::from_element(1, 0.0);
        assert!(matches!(
            numerov_sweep(&s, 1.0, (&a, &a), Direction::LeftToRight),
            Err(Error::Conditioning(_))
        ));
    }
}
