//! Scenario files.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "grid": {"x_min": 0.0, "x_max": 3.141592653589793, "n_points": 2001},
//!   "channels": {"thresholds": [0.0, 0.0]},
//!   "potential": {"kind": "builtin", "name": "constant_coupling_box", "params": {"coupling": 0.5}},
//!   "boundary": "bound-box",
//!   "solver": {"e_min": 0.0, "e_max": 5.0}
//! }
//! ```
//!
//! `potential.kind` is `tabulated` (CSV file relative to the scenario), `builtin`
//! or `reduce` (a [`ReductionRecipe`] inline). `channels` may be omitted: tabulated
//! and builtin potentials then use zero thresholds, reduced ones use the basis
//! eigenvalues.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{
    build_grid, BoundaryKind, ChannelSet, Grid, PotentialMatrixField, Scenario, SolverSettings,
    DEFAULT_POINTS,
};
use crate::reduction::{Profile, ReductionRecipe};

pub const SCHEMA_VERSION: u64 = 1;

/// Relative tolerance when matching a tabulated `x` column against the grid.
const GRID_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn default_points() -> usize {
    DEFAULT_POINTS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

/// Solver block: bound/scattering controls plus default energy ranges.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    #[serde(flatten)]
    pub settings: SolverSettings,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    /// Single scattering energy.
    pub energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Builtin {
    /// Zero diagonal, constant `coupling` in every off-diagonal entry.
    ConstantCouplingBox {
        #[serde(default = "half")]
        coupling: f64,
        #[serde(default = "two")]
        n_channels: usize,
    },
    /// Two channels coupled by a Gaussian, with optional Gaussian diagonal bumps
    /// of the same shape and constant diagonal offsets.
    GaussianBumpPair {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        diagonal_bump: [f64; 2],
        #[serde(default)]
        offset: [f64; 2],
    },
    /// Two wells of depth `depth` on `[start, end]`, coupled by `coupling` inside.
    SquareWellPair {
        depth: f64,
        start: f64,
        end: f64,
        #[serde(default)]
        coupling: f64,
    },
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}

impl Builtin {
    pub fn n_channels(&self) -> usize {
        match self {
            Builtin::ConstantCouplingBox { n_channels, .. } => *n_channels,
            _ => 2,
        }
    }

    pub fn field(&self, grid: Grid) -> Result<PotentialMatrixField> {
        match *self {
            Builtin::ConstantCouplingBox {
                coupling,
                n_channels,
            } => {
                if n_channels == 0 {
                    return Err(Error::domain("constant_coupling_box needs n_channels >= 1"));
                }
                Ok(PotentialMatrixField::from_fn(
                    grid,
                    n_channels,
                    |_, a, b| {
                        if a == b {
                            0.0
                        } else {
                            coupling
                        }
                    },
                ))
            }
            Builtin::GaussianBumpPair {
                amplitude,
                center,
                width,
                diagonal_bump,
                offset,
            } => {
                if !(width > 0.0) {
                    return Err(Error::domain("gaussian_bump_pair needs width > 0"));
                }
                let shape = |x: f64| (-0.5 * ((x - center) / width).powi(2)).exp();
                Ok(PotentialMatrixField::from_fn(grid, 2, |x, a, b| {
                    if a == b {
                        offset[a] + diagonal_bump[a] * shape(x)
                    } else {
                        amplitude * shape(x)
                    }
                }))
            }
            Builtin::SquareWellPair {
                depth,
                start,
                end,
                coupling,
            } => {
                if !(start < end) {
                    return Err(Error::domain("square_well_pair needs start < end"));
                }
                let step = |h: f64| Profile::SquareStep {
                    height: h,
                    start,
                    end,
                };
                let (well, link) = (step(-depth), step(coupling));
                Ok(PotentialMatrixField::from_fn(grid, 2, |x, a, b| {
                    if a == b {
                        well.eval(x)
                    } else {
                        link.eval(x)
                    }
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Tabulated { file: PathBuf },
    Builtin(Builtin),
    Reduce(ReductionRecipe),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u64,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub channels: Option<ChannelSpec>,
    pub potential: PotentialSpec,
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub solver: SolverSpec,
}

/// A built scenario plus what the file said about how to run it.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub recipe: Option<ReductionRecipe>,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub energy: Option<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| Error::Scenario(format!("invalid JSON: {e}")))?;
        match raw.get("schema").and_then(Value::as_u64) {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Scenario(format!("unsupported schema version {v}"))),
            None => return Err(Error::Scenario("missing required key \"schema\": 1".into())),
        }
        serde_json::from_value(raw).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// Builds the scenario. Relative CSV paths resolve against `base_dir`.
    /// `n_channels` overrides the basis size of a reduced potential.
    pub fn build(&self, base_dir: &Path, n_channels: Option<usize>) -> Result<LoadedScenario> {
        let grid_from_spec = || -> Result<Grid> {
            let g = self
                .grid
                .as_ref()
                .ok_or_else(|| Error::Scenario("missing key \"grid\"".into()))?;
            build_grid(g.x_min, g.x_max, g.n_points)
        };
        let mut recipe = None;
        let (potential, default_channels) = match &self.potential {
            PotentialSpec::Tabulated { file } => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base_dir.join(file)
                };
                let expected = match &self.grid {
                    Some(_) => Some(grid_from_spec()?),
                    None => None,
                };
                let field = read_potential_csv(&path, expected.as_ref())?;
                let n = field.n_channels();
                (field, ChannelSet::new(vec![0.0; n]))
            }
            PotentialSpec::Builtin(b) => (
                b.field(grid_from_spec()?)?,
                ChannelSet::new(vec![0.0; b.n_channels()]),
            ),
            PotentialSpec::Reduce(r) => {
                let r = match n_channels {
                    Some(n) => r.with_channels(n),
                    None => r.clone(),
                };
                r.basis.check()?;
                let grid = grid_from_spec()?;
                let issues = r.spec.violations(&r.basis, (grid.x_min(), grid.x_max()));
                if !issues.is_empty() {
                    return Err(Error::Validation(issues));
                }
                let field = r.project(&grid)?;
                let channels = r.channels();
                recipe = Some(r);
                (field, channels)
            }
        };
        let channels = match &self.channels {
            Some(c) if recipe.is_some() => {
                let derived = default_channels.thresholds();
                let same = c.thresholds.len() == derived.len()
                    && c.thresholds
                        .iter()
                        .zip(derived)
                        .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
                if !same {
                    return Err(Error::Validation(vec![
                        "channel thresholds disagree with the reduction basis".into(),
                    ]));
                }
                with_labels(default_channels, c)
            }
            Some(c) => with_labels(ChannelSet::new(c.thresholds.clone()), c),
            None => default_channels,
        };
        let scenario = Scenario::new(channels, potential, self.boundary)
            .with_solver(self.solver.settings.clone());
        Ok(LoadedScenario {
            scenario,
            recipe,
            e_min: self.solver.e_min,
            e_max: self.solver.e_max,
            energy: self.solver.energy,
        })
    }
}

fn with_labels(set: ChannelSet, spec: &ChannelSpec) -> ChannelSet {
    match &spec.labels {
        Some(l) => set.with_labels(l.clone()),
        None => set,
    }
}

/// Reads, parses and builds a scenario file. A missing file is an I/O error;
/// anything wrong with its content is a scenario error.
pub fn load_scenario(path: &Path, n_channels: Option<usize>) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path)?;
    let file = ScenarioFile::parse(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    file.build(base, n_channels)
}

/// Fixed-width scientific format with 17 significant digits; round-trips any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `x,V_1_1,V_1_2,...,V_N_N` over the upper triangle, row-major.
pub fn potential_csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["x".to_string()];
    for a in 1..=n {
        for b in a..=n {
            h.push(format!("V_{a}_{b}"));
        }
    }
    h
}

pub fn potential_csv_string(field: &PotentialMatrixField) -> String {
    let mut out = potential_csv_header(field.n_channels()).join(",");
    out.push('\n');
    for i in 0..field.grid().n_points() {
        out.push_str(&format_number(field.grid().point(i)));
        for v in field.upper_row(i) {
            let _ = write!(out, ",{}", format_number(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_potential_csv(field: &PotentialMatrixField, path: &Path) -> Result<()> {
    std::fs::write(path, potential_csv_string(field))?;
    Ok(())
}

fn channels_from_header(header: &csv::StringRecord) -> Result<usize> {
    let cols = header.len().saturating_sub(1);
    let n = (1..=crate::propagate::MAX_CHANNELS * 4)
        .find(|n| n * (n + 1) / 2 == cols)
        .ok_or_else(|| {
            Error::Scenario(format!("{cols} potential columns is not a triangle number"))
        })?;
    let want = potential_csv_header(n);
    for (got, want) in header.iter().zip(&want) {
        if got.trim() != want {
            return Err(Error::Scenario(format!(
                "unexpected column {got:?}, wanted {want:?}"
            )));
        }
    }
    Ok(n)
}

/// Reads a tabulated potential. With `expected`, the `x` column must match it.
pub fn read_potential_csv(path: &Path, expected: Option<&Grid>) -> Result<PotentialMatrixField> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Scenario(format!("{other:?}")),
        })?;
    let header = rdr
        .headers()
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?
        .clone();
    let n = channels_from_header(&header)?;
    let mut xs = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Scenario(format!("{} row {}: {e}", path.display(), line + 2)))?;
        xs.push(nums[0]);
        rows.push(nums[1..].to_vec());
    }
    if xs.len() < 3 {
        return Err(Error::Scenario(
            "tabulated potential needs at least 3 rows".into(),
        ));
    }
    let grid = match expected {
        Some(g) => *g,
        None => build_grid(xs[0], xs[xs.len() - 1], xs.len())?,
    };
    if xs.len() != grid.n_points() {
        return Err(Error::Validation(vec![format!(
            "tabulated potential has {} rows, grid has {} points",
            xs.len(),
            grid.n_points()
        )]));
    }
    let tol = GRID_MATCH_TOL * grid.length();
    if let Some(i) = (0..xs.len()).find(|&i| (xs[i] - grid.point(i)).abs() > tol) {
        return Err(Error::Validation(vec![format!(
            "tabulated x at row {} is {}, grid point is {}",
            i + 2,
            xs[i],
            grid.point(i)
        )]));
    }
    PotentialMatrixField::from_upper_rows(grid, n, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const BOX: &str = r#"{
        "schema": 1,
        "grid": {"x_min": 0.0, "x_max": 3.141592653589793, "n_points": 401},
        "potential": {"kind": "builtin", "name": "constant_coupling_box", "params": {"coupling": 0.5}},
        "boundary": "bound-box",
        "solver": {"e_step": 0.1, "e_min": 0.0, "e_max": 5.0}
    }"#;

    #[test]
    fn parses_builtin_box() {
        let f = ScenarioFile::parse(BOX).unwrap();
        let l = f.build(Path::new("."), None).unwrap();
        assert_eq!(l.scenario.n_channels(), 2);
        assert_eq!(l.scenario.grid.n_points(), 401);
        assert_eq!(l.scenario.potential.get(7, 0, 1), 0.5);
        assert_eq!(l.scenario.solver.e_step, 0.1);
        assert_eq!(l.e_max, Some(5.0));
        assert!(l.scenario.ensure_valid().is_ok());
    }

    #[test]
    fn schema_key_is_required() {
        let no_schema = BOX.replace("\"schema\": 1,", "");
        assert!(matches!(
            ScenarioFile::parse(&no_schema),
            Err(Error::Scenario(_))
        ));
        let v2 = BOX.replace("\"schema\": 1", "\"schema\": 2");
        assert!(ScenarioFile::parse(&v2).is_err());
    }

    #[test]
    fn grid_defaults_to_2001_points() {
        let text = BOX.replace(", \"n_points\": 401", "");
        let l = ScenarioFile::parse(&text)
            .unwrap()
            .build(Path::new("."), None)
            .unwrap();
        assert_eq!(l.scenario.grid.n_points(), 2001);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = build_grid(-1.0, 2.0, 31).unwrap();
        let field = PotentialMatrixField::from_fn(grid, 3, |x, a, b| {
            (x * (a + 2 * b + 1) as f64).sin() / 3.0
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        write_potential_csv(&field, &path).unwrap();
        let back = read_potential_csv(&path, Some(&grid)).unwrap();
        assert_eq!(back, field);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,V_1_1,V_1_2,V_1_3,V_2_2,V_2_3,V_3_3\n"));
    }

    #[test]
    fn tabulated_scenario_resolves_relative_path() {
        let grid = build_grid(0.0, PI, 21).unwrap();
        let field = PotentialMatrixField::from_fn(grid, 1, |x, _, _| x);
        let dir = tempfile::tempdir().unwrap();
        write_potential_csv(&field, &dir.path().join("pot.csv")).unwrap();
        let text = r#"{"schema": 1, "potential": {"kind": "tabulated", "file": "pot.csv"},
                       "boundary": "bound-box"}"#;
        std::fs::write(dir.path().join("s.json"), text).unwrap();
        let l = load_scenario(&dir.path().join("s.json"), None).unwrap();
        assert_eq!(l.scenario.grid.n_points(), 21);
        assert_eq!(l.scenario.channels.thresholds(), &[0.0]);
    }

    #[test]
    fn reduce_derives_channels() {
        let text = r#"{
            "schema": 1,
            "grid": {"x_min": 0.0, "x_max": 3.141592653589793, "n_points": 101},
            "potential": {"kind": "reduce",
                          "basis": {"kind": "box", "xi_min": 0.0, "xi_max": 3.141592653589793, "n_functions": 2},
                          "spec": {"form": "bilinear", "strength": 0.2},
                          "n_xi": 401},
            "boundary": "bound-box"
        }"#;
        let f = ScenarioFile::parse(text).unwrap();
        let l = f.build(Path::new("."), None).unwrap();
        let t = l.scenario.channels.thresholds();
        assert!((t[0] - 1.0).abs() < 1e-12 && (t[1] - 4.0).abs() < 1e-12);
        let l3 = f.build(Path::new("."), Some(3)).unwrap();
        assert_eq!(l3.scenario.n_channels(), 3);
        assert_eq!(l3.recipe.unwrap().basis.n_functions, 3);
    }
}
