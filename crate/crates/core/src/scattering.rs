//! Reflection and transmission for asymptotically flat potentials.
//!
//! Incidence is from the left. In the flat edge regions each channel is
//! written in terms of the exact solutions of the Numerov recurrence with a
//! constant coupling matrix, `exp(±i k' x)` for open and `exp(±κ' x)` for
//! closed channels, where `cos(k'h) = (1 - 5gq)/(1 + gq)` and `q = E_α - V_∞,αα`.
//! Using the discrete wave numbers keeps free propagation exact, so a zero
//! potential gives `T = I` to roundoff.
//!
//! Left and right solution sets are propagated to the grid midpoint and
//! matched there on values and central differences.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::model::{BoundaryKind, Scenario};
use crate::propagate::{propagate_set, Direction};

type C64 = Complex<f64>;

/// Matching is refused when the column-normalized system is worse than this.
pub const MAX_CONDITION: f64 = 1e12;
/// Energies closer than this to a threshold are refused.
pub const THRESHOLD_GUARD: f64 = 1e-9;
const DIAGONAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ScatteringResult {
    pub energy: f64,
    /// Channels open at the left edge (possible incident channels), ascending.
    pub open_channels: Vec<usize>,
    /// Channels open at the right edge, ascending.
    pub open_right: Vec<usize>,
    /// `√(E_α - V_∞,αα)` at the left edge for each open left channel.
    pub momenta: Vec<f64>,
    /// Same at the right edge for each open right channel.
    pub momenta_right: Vec<f64>,
    /// `R[(β, α)]`: amplitude reflected into open channel `β` for unit
    /// incidence in open channel `α` (indices into `open_channels`).
    pub reflection: DMatrix<C64>,
    /// `T[(β, α)]`: `β` indexes `open_right`, `α` indexes `open_channels`.
    pub transmission: DMatrix<C64>,
    /// Largest deviation of the incident flux balance from one.
    pub unitarity_defect: f64,
}

impl ScatteringResult {
    /// Flux-weighted reflection probability `(k_β/k_α)|R_βα|²`.
    pub fn reflection_probability(&self, out: usize, inc: usize) -> f64 {
        self.momenta[out] / self.momenta[inc] * self.reflection[(out, inc)].norm_sqr()
    }

    /// Flux-weighted transmission probability `(k_β/k_α)|T_βα|²`.
    pub fn transmission_probability(&self, out: usize, inc: usize) -> f64 {
        self.momenta_right[out] / self.momenta[inc] * self.transmission[(out, inc)].norm_sqr()
    }

    /// `Σ_β` of both probabilities for incident open channel `inc`.
    pub fn total_flux(&self, inc: usize) -> f64 {
        let r: f64 = (0..self.open_channels.len())
            .map(|b| self.reflection_probability(b, inc))
            .sum();
        let t: f64 = (0..self.open_right.len())
            .map(|b| self.transmission_probability(b, inc))
            .sum();
        r + t
    }
}

/// Asymptotic wave of one channel at one edge.
#[derive(Clone, Copy, Debug)]
enum EdgeWave {
    /// Discrete wave number `k'`.
    Open(f64),
    /// Discrete decay constant `κ'`.
    Closed(f64),
}

fn edge_wave(q: f64, h: f64) -> Result<EdgeWave> {
    let g = h * h / 12.0;
    let c = (1.0 - 5.0 * g * q) / (1.0 + g * q);
    if !(1.0 + g * q > 0.0) || c < -1.0 {
        return Err(Error::Conditioning(format!(
            "grid step {h} too coarse for channel energy {q}"
        )));
    }
    Ok(if q > 0.0 {
        EdgeWave::Open(c.acos() / h)
    } else {
        EdgeWave::Closed(c.acosh() / h)
    })
}

/// Left-incidence scattering at total energy `energy`.
pub fn solve_scattering(s: &Scenario, energy: f64) -> Result<ScatteringResult> {
    s.ensure_valid()?;
    if s.boundary != BoundaryKind::Scattering {
        return Err(Error::domain(
            "scattering needs a scenario with boundary kind scattering",
        ));
    }
    let n = s.n_channels();
    let np = s.grid.n_points();
    let h = s.grid.h();
    let (left_edge, right_edge) = (0, np - 1);

    let mut off_diagonal = Vec::new();
    for (side, i) in [("left", left_edge), ("right", right_edge)] {
        let bad =
            (0..n).any(|a| (0..n).any(|b| a != b && s.potential.get(i, a, b).abs() > DIAGONAL_TOL));
        if bad {
            off_diagonal.push(format!("potential not diagonal at {side} edge"));
        }
    }
    if !off_diagonal.is_empty() {
        return Err(Error::Validation(off_diagonal));
    }

    for a in 0..n {
        let eps = s.channels.threshold(a);
        for t in [
            eps,
            eps + s.potential.get(left_edge, a, a),
            eps + s.potential.get(right_edge, a, a),
        ] {
            if (energy - t).abs() < THRESHOLD_GUARD {
                return Err(Error::ThresholdProximity {
                    energy,
                    threshold: t,
                });
            }
        }
    }

    let q_left: Vec<f64> = (0..n)
        .map(|a| s.channels.channel_energy(energy, a) - s.potential.get(left_edge, a, a))
        .collect();
    let q_right: Vec<f64> = (0..n)
        .map(|a| s.channels.channel_energy(energy, a) - s.potential.get(right_edge, a, a))
        .collect();
    let waves_left = q_left
        .iter()
        .map(|&q| edge_wave(q, h))
        .collect::<Result<Vec<_>>>()?;
    let waves_right = q_right
        .iter()
        .map(|&q| edge_wave(q, h))
        .collect::<Result<Vec<_>>>()?;
    let open_left: Vec<usize> = (0..n).filter(|&a| q_left[a] > 0.0).collect();
    let open_right: Vec<usize> = (0..n).filter(|&a| q_right[a] > 0.0).collect();
    if open_left.is_empty() {
        return Err(Error::NoOpenChannel(energy));
    }

    let x0 = s.grid.x_min();
    let x_end = s.grid.x_max();
    // Columns at left-edge points: outgoing/decaying basis, then one incident wave per open channel.
    let left_columns = n + open_left.len();
    let left_init = |i: usize| {
        let x = s.grid.point(i);
        let mut m = DMatrix::<C64>::zeros(n, left_columns);
        for a in 0..n {
            m[(a, a)] = match waves_left[a] {
                EdgeWave::Open(k) => C64::new(0.0, -k * x).exp(),
                EdgeWave::Closed(kappa) => C64::new((kappa * (x - x0)).exp(), 0.0),
            };
        }
        for (j, &a) in open_left.iter().enumerate() {
            if let EdgeWave::Open(k) = waves_left[a] {
                m[(a, n + j)] = C64::new(0.0, k * x).exp();
            }
        }
        m
    };
    let right_init = |i: usize| {
        let x = s.grid.point(i);
        let mut m = DMatrix::<C64>::zeros(n, n);
        for a in 0..n {
            m[(a, a)] = match waves_right[a] {
                EdgeWave::Open(k) => C64::new(0.0, k * x).exp(),
                EdgeWave::Closed(kappa) => C64::new((-kappa * (x - x_end)).exp(), 0.0),
            };
        }
        m
    };

    let m = np / 2;
    let left = propagate_complex(
        s,
        energy,
        left_init(0),
        left_init(1),
        Direction::LeftToRight,
        m + 1,
    )?;
    let right = propagate_complex(
        s,
        energy,
        right_init(np - 1),
        right_init(np - 2),
        Direction::RightToLeft,
        m - 1,
    )?;
    let at = |set: &Vec<DMatrix<C64>>, first: usize, i: usize| set[i - first].clone();
    let (lf, rf) = (0, m - 1);
    let lv = at(&left, lf, m);
    let ld = (at(&left, lf, m + 1) - at(&left, lf, m - 1)) / C64::new(2.0 * h, 0.0);
    let rv = at(&right, rf, m);
    let rd = (at(&right, rf, m + 1) - at(&right, rf, m - 1)) / C64::new(2.0 * h, 0.0);

    let mut system = DMatrix::<C64>::zeros(2 * n, 2 * n);
    system.view_mut((0, 0), (n, n)).copy_from(&lv.columns(0, n));
    system.view_mut((n, 0), (n, n)).copy_from(&ld.columns(0, n));
    system.view_mut((0, n), (n, n)).copy_from(&(-&rv));
    system.view_mut((n, n), (n, n)).copy_from(&(-&rd));
    let n_in = open_left.len();
    let mut rhs = DMatrix::<C64>::zeros(2 * n, n_in);
    rhs.view_mut((0, 0), (n, n_in))
        .copy_from(&(-lv.columns(n, n_in)));
    rhs.view_mut((n, 0), (n, n_in))
        .copy_from(&(-ld.columns(n, n_in)));

    let mut norms = Vec::with_capacity(2 * n);
    for mut col in system.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Conditioning(format!(
                "degenerate matching column at E = {energy}"
            )));
        }
        col /= C64::new(norm, 0.0);
        norms.push(norm);
    }
    let sv = system.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let mut coeffs = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    for (r, norm) in norms.iter().enumerate() {
        for c in 0..n_in {
            coeffs[(r, c)] /= C64::new(*norm, 0.0);
        }
    }

    let reflection = DMatrix::from_fn(n_in, n_in, |b, a| coeffs[(open_left[b], a)]);
    let transmission = DMatrix::from_fn(open_right.len(), n_in, |b, a| {
        coeffs[(n + open_right[b], a)]
    });
    let momenta: Vec<f64> = open_left.iter().map(|&a| q_left[a].sqrt()).collect();
    let momenta_right: Vec<f64> = open_right.iter().map(|&a| q_right[a].sqrt()).collect();

    let mut result = ScatteringResult {
        energy,
        open_channels: open_left,
        open_right,
        momenta,
        momenta_right,
        reflection,
        transmission,
        unitarity_defect: 0.0,
    };
    result.unitarity_defect = (0..n_in)
        .map(|a| (result.total_flux(a) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(result)
}

/// Right incidence, obtained by mirroring the potential through the grid center.
pub fn solve_scattering_from_right(s: &Scenario, energy: f64) -> Result<ScatteringResult> {
    solve_scattering(&s.reflected(), energy)
}

/// Solves each energy independently.
pub fn scattering_sweep(s: &Scenario, energies: &[f64]) -> Vec<Result<ScatteringResult>> {
    use rayon::prelude::*;
    energies
        .par_iter()
        .map(|&e| solve_scattering(s, e))
        .collect()
}

/// Propagates complex columns by carrying real and imaginary parts side by side.
fn propagate_complex(
    s: &Scenario,
    energy: f64,
    first: DMatrix<C64>,
    second: DMatrix<C64>,
    direction: Direction,
    stop: usize,
) -> Result<Vec<DMatrix<C64>>> {
    let split = |m: &DMatrix<C64>| {
        let (r, c) = m.shape();
        DMatrix::from_fn(r, 2 * c, |i, j| {
            if j < c {
                m[(i, j)].re
            } else {
                m[(i, j - c)].im
            }
        })
    };
    let k = first.ncols();
    let set = propagate_set(s, energy, split(&first), split(&second), direction, stop)?;
    Ok((set.first_index()..=set.last_index())
        .map(|i| {
            let v = set.at(i);
            DMatrix::from_fn(v.nrows(), k, |r, c| C64::new(v[(r, c)], v[(r, c + k)]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, ChannelSet, PotentialMatrixField};

    fn free(n: usize, thresholds: Vec<f64>) -> Scenario {
        let grid = build_grid(-5.0, 5.0, 1001).unwrap();
        Scenario::new(
            ChannelSet::new(thresholds),
            PotentialMatrixField::zeros(grid, n),
            BoundaryKind::Scattering,
        )
    }

    #[test]
    fn free_wave_is_fully_transmitted() {
        let r = solve_scattering(&free(1, vec![0.0]), 1.0).unwrap();
        assert!((r.transmission_probability(0, 0) - 1.0).abs() < 1e-10);
        assert!(r.reflection_probability(0, 0) < 1e-10);
        assert!((r.transmission[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn zero_potential_gives_identity_transmission() {
        let r = solve_scattering(&free(3, vec![0.0, 0.5, 1.0]), 2.0).unwrap();
        assert_eq!(r.open_channels, vec![0, 1, 2]);
        for b in 0..3 {
            for a in 0..3 {
                let t = if a == b {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((r.transmission[(b, a)] - t).norm() < 1e-8);
                assert!(r.reflection[(b, a)].norm() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_channels_are_excluded() {
        let r = solve_scattering(&free(2, vec![0.0, 3.0]), 1.0).unwrap();
        assert_eq!(r.open_channels, vec![0]);
        assert_eq!(r.transmission.shape(), (1, 1));
    }

    #[test]
    fn threshold_energy_is_refused() {
        let err = solve_scattering(&free(2, vec![0.0, 3.0]), 3.0).unwrap_err();
        assert!(err
            .to_string()
            .starts_with("energy within 1e-9 of threshold"));
    }

    #[test]
    fn no_open_channel() {
        let err = solve_scattering(&free(1, vec![1.0]), 0.5).unwrap_err();
        assert!(matches!(err, Error::NoOpenChannel(_)));
    }

    #[test]
    fn coupled_edges_are_rejected() {
        let grid = build_grid(-5.0, 5.0, 201).unwrap();
        let field =
            PotentialMatrixField::from_fn(grid, 2, |_, a, b| if a == b { 0.0 } else { 0.1 });
        let s = Scenario::new(ChannelSet::degenerate(2), field, BoundaryKind::Scattering);
        assert!(matches!(
            solve_scattering(&s, 1.0),
            Err(Error::Validation(_))
        ));
    }
}
