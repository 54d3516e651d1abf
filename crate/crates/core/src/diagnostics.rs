//! Effective kinetic energy and the sign rule for coupling terms.
//!
//! Writing the right-hand side of channel `α` with `Ψ_α` factored out gives
//!
//! ```text
//! E_kin,α(x) = (E - ε_α) - V_αα(x) - Σ_{β≠α} V_αβ(x) Ψ_β(x)/Ψ_α(x)
//! ```
//!
//! so that `Ψ_α'' = -E_kin,α Ψ_α`. Positive `E_kin,α` bends the wave toward
//! the axis, negative bends it away. Each coupling term contributes
//! `-V_αβ Ψ_β/Ψ_α`: with `Ψ_α` and `Ψ_β` of equal sign a positive `V_αβ`
//! lowers `E_kin,α` like an ordinary barrier, but with opposite signs the same
//! positive entry raises it. That is the attractive barrier; a negative entry
//! under opposite signs is a repulsive well.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelWavefunction, Scenario};

/// Relative near-node guard: `Ψ_α` smaller than this times `max|Ψ_α|` is a node.
pub const NODE_GUARD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    /// Raises the effective kinetic energy of the target channel.
    Attractive,
    /// Lowers it.
    Repulsive,
    /// Contributes exactly zero.
    Neutral,
    /// Target component is at a node.
    Undefined,
}

impl Classification {
    /// One-letter code used in CSV output.
    pub fn code(self) -> char {
        match self {
            Classification::Attractive => 'A',
            Classification::Repulsive => 'R',
            Classification::Neutral => 'N',
            Classification::Undefined => 'U',
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Classification::Attractive => Classification::Repulsive,
            Classification::Repulsive => Classification::Attractive,
            other => other,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// One coupling term `V_αβ Ψ_β` seen from channel `α` at one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingDiagnostic {
    pub index: usize,
    pub x: f64,
    pub target: usize,
    pub source: usize,
    pub coupling: f64,
    /// `Ψ_β / Ψ_α`, absent at a node of `Ψ_α`.
    pub ratio: Option<f64>,
    /// `-V_αβ Ψ_β / Ψ_α`, absent at a node of `Ψ_α`.
    pub contribution: Option<f64>,
    pub classification: Classification,
}

impl CouplingDiagnostic {
    /// A positive entry acting attractively or a negative one acting repulsively.
    pub fn is_inverted(&self) -> bool {
        (self.coupling > 0.0 && self.classification == Classification::Attractive)
            || (self.coupling < 0.0 && self.classification == Classification::Repulsive)
    }
}

/// Classifies a single coupling term.
///
/// `target_scale` is `max_j |Ψ_α(x_j)|`, used for the near-node guard.
pub fn classify_term(
    coupling: f64,
    psi_target: f64,
    psi_source: f64,
    target_scale: f64,
) -> (Option<f64>, Option<f64>, Classification) {
    if psi_target.abs() < NODE_GUARD * target_scale || psi_target == 0.0 {
        return (None, None, Classification::Undefined);
    }
    let ratio = psi_source / psi_target;
    if coupling == 0.0 || psi_source == 0.0 {
        return (Some(ratio), Some(0.0), Classification::Neutral);
    }
    let contribution = -coupling * ratio;
    let class = if contribution > 0.0 {
        Classification::Attractive
    } else if contribution < 0.0 {
        Classification::Repulsive
    } else {
        // ratio underflowed to zero
        Classification::Neutral
    };
    (Some(ratio), Some(contribution), class)
}

/// `E_kin,α(x_i)` per point and channel; `None` at nodes of `Ψ_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveKineticProfile {
    n_points: usize,
    n_channels: usize,
    values: Vec<Option<f64>>,
}

impl EffectiveKineticProfile {
    pub fn get(&self, i: usize, alpha: usize) -> Option<f64> {
        self.values[i * self.n_channels + alpha]
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

fn check_compatible(s: &Scenario, psi: &ChannelWavefunction) -> Result<()> {
    if psi.n_channels() != s.n_channels() || !psi.grid().same_as(&s.grid) {
        return Err(Error::domain(
            "wavefunction is not defined on the scenario grid and channels",
        ));
    }
    Ok(())
}

pub fn effective_kinetic_energy(
    s: &Scenario,
    psi: &ChannelWavefunction,
) -> Result<EffectiveKineticProfile> {
    check_compatible(s, psi)?;
    let n = s.n_channels();
    let np = s.grid.n_points();
    let scales: Vec<f64> = (0..n).map(|a| psi.max_abs(a)).collect();
    let mut values = Vec::with_capacity(np * n);
    for i in 0..np {
        for a in 0..n {
            let pa = psi.get(i, a);
            if pa.abs() < NODE_GUARD * scales[a] || pa == 0.0 {
                values.push(None);
                continue;
            }
            let mut ekin = s.channels.channel_energy(psi.energy(), a) - s.potential.get(i, a, a);
            for b in (0..n).filter(|&b| b != a) {
                ekin -= s.potential.get(i, a, b) * psi.get(i, b) / pa;
            }
            values.push(Some(ekin));
        }
    }
    Ok(EffectiveKineticProfile {
        n_points: np,
        n_channels: n,
        values,
    })
}

/// One record per grid point and ordered pair `(α, β)`, `β ≠ α`.
pub fn classify_coupling(
    s: &Scenario,
    psi: &ChannelWavefunction,
) -> Result<Vec<CouplingDiagnostic>> {
    check_compatible(s, psi)?;
    let n = s.n_channels();
    let scales: Vec<f64> = (0..n).map(|a| psi.max_abs(a)).collect();
    let mut out = Vec::with_capacity(s.grid.n_points() * n * n.saturating_sub(1));
    for i in 0..s.grid.n_points() {
        for a in 0..n {
            for b in (0..n).filter(|&b| b != a) {
                let coupling = s.potential.get(i, a, b);
                let (ratio, contribution, classification) =
                    classify_term(coupling, psi.get(i, a), psi.get(i, b), scales[a]);
                out.push(CouplingDiagnostic {
                    index: i,
                    x: s.grid.point(i),
                    target: a,
                    source: b,
                    coupling,
                    ratio,
                    contribution,
                    classification,
                });
            }
        }
    }
    Ok(out)
}

/// A maximal run of grid points where coupling `(target, source)` is inverted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InversionInterval {
    pub target: usize,
    pub source: usize,
    pub start_index: usize,
    pub end_index: usize,
    pub x_start: f64,
    pub x_end: f64,
}

impl InversionInterval {
    pub fn n_points(&self) -> usize {
        self.end_index - self.start_index + 1
    }
}

/// Maximal inverted runs per ordered pair; single-point runs are dropped.
///
/// Records are grouped by pair and sorted by grid index before scanning, so
/// any ordering of `diags` gives the same intervals.
pub fn detect_inversion_intervals(diags: &[CouplingDiagnostic]) -> Vec<InversionInterval> {
    let mut sorted: Vec<&CouplingDiagnostic> = diags.iter().collect();
    sorted.sort_by_key(|d| (d.target, d.source, d.index));

    let mut out = Vec::new();
    let mut run: Option<(&CouplingDiagnostic, &CouplingDiagnostic)> = None;
    let mut flush = |run: &mut Option<(&CouplingDiagnostic, &CouplingDiagnostic)>| {
        if let Some((first, last)) = run.take() {
            if last.index > first.index {
                out.push(InversionInterval {
                    target: first.target,
                    source: first.source,
                    start_index: first.index,
                    end_index: last.index,
                    x_start: first.x,
                    x_end: last.x,
                });
            }
        }
    };
    for d in sorted {
        let extends = matches!(run, Some((first, last))
            if first.target == d.target && first.source == d.source && last.index + 1 == d.index);
        if d.is_inverted() {
            if extends {
                if let Some((_, last)) = run.as_mut() {
                    *last = d;
                }
            } else {
                flush(&mut run);
                run = Some((d, d));
            }
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, BoundaryKind, ChannelSet, PotentialMatrixField};

    fn single_point(
        e: f64,
        eps: f64,
        v: [[f64; 2]; 2],
        psi: [f64; 2],
    ) -> (Scenario, ChannelWavefunction) {
        let grid = build_grid(0.0, 1.0, 3).unwrap();
        let field = PotentialMatrixField::from_fn(grid, 2, |_, a, b| v[a][b]);
        let s = Scenario::new(
            ChannelSet::new(vec![eps, eps]),
            field,
            BoundaryKind::BoundBox,
        );
        let values = (0..3).flat_map(|_| psi).collect();
        let wf = ChannelWavefunction::new(grid, 2, e, values).unwrap();
        (s, wf)
    }

    #[test]
    fn effective_kinetic_energy_examples() {
        // E_α = 2, V_αα = 0.5, V_αβ = 1, Ψ_β/Ψ_α = ±0.5
        let (s, wf) = single_point(2.0, 0.0, [[0.5, 1.0], [1.0, 0.5]], [1.0, 0.5]);
        let p = effective_kinetic_energy(&s, &wf).unwrap();
        assert!((p.get(1, 0).unwrap() - 1.0).abs() < 1e-15);

        let (s, wf) = single_point(2.0, 0.0, [[0.5, 1.0], [1.0, 0.5]], [1.0, -0.5]);
        let p = effective_kinetic_energy(&s, &wf).unwrap();
        assert!((p.get(1, 0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_channel_profile_is_e_minus_v() {
        let grid = build_grid(0.0, 3.0, 31).unwrap();
        let field = PotentialMatrixField::from_fn(grid, 1, |x, _, _| 0.3 * x);
        let s = Scenario::new(ChannelSet::new(vec![0.25]), field, BoundaryKind::BoundBox);
        let c: Vec<f64> = grid.points().iter().map(|x| x.sin()).collect();
        let wf = ChannelWavefunction::from_components(grid, 2.0, &[c]).unwrap();
        let p = effective_kinetic_energy(&s, &wf).unwrap();
        assert_eq!(p.get(0, 0), None);
        for i in 1..31 {
            let want = 2.0 - 0.25 - 0.3 * grid.point(i);
            assert!((p.get(i, 0).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn classification_examples() {
        let c = |v: f64, a: f64, b: f64| classify_term(v, a, b, 1.0).2;
        assert_eq!(c(1.0, 0.3, 0.6), Classification::Repulsive);
        assert_eq!(c(1.0, 0.3, -0.6), Classification::Attractive);
        assert_eq!(c(-1.0, -0.3, 0.6), Classification::Repulsive);
        assert_eq!(c(1.0, 0.3, 0.0), Classification::Neutral);
        assert_eq!(c(0.0, 0.3, 0.2), Classification::Neutral);
        assert_eq!(c(1.0, 1e-9, 0.2), Classification::Undefined);
        assert_eq!(c(0.0, 0.0, 0.2), Classification::Undefined);
    }

    #[test]
    fn intervals_need_two_points() {
        let mk = |index: usize, class| CouplingDiagnostic {
            index,
            x: index as f64 * 0.1,
            target: 0,
            source: 1,
            coupling: 1.0,
            ratio: None,
            contribution: None,
            classification: class,
        };
        use Classification::*;
        let diags = vec![
            mk(0, Attractive),
            mk(1, Repulsive),
            mk(2, Attractive),
            mk(3, Attractive),
            mk(4, Attractive),
            mk(5, Undefined),
            mk(6, Attractive),
        ];
        let found = detect_inversion_intervals(&diags);
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].start_index, found[0].end_index), (2, 4));
        assert!((found[0].x_start - 0.2).abs() < 1e-15);

        let mut shuffled = diags.clone();
        shuffled.reverse();
        assert_eq!(detect_inversion_intervals(&shuffled), found);
    }
}
