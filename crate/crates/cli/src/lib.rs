//! `cchan`: scenario files in, CSV files out.
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 on invalid scenarios or
//! arguments (`VALIDATION:` lines on stderr), 3 on numerical failure
//! (`NUMERICS:` line on stderr).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use coupled_channels::diagnostics::{
    classify_coupling, detect_inversion_intervals, effective_kinetic_energy, Classification,
};
use coupled_channels::oracle2d::{convergence_study, solve_2d_eigen, Grid2D};
use coupled_channels::scattering::{solve_scattering, ScatteringResult};
use coupled_channels::scenario::{
    format_number, load_scenario, potential_csv_string, LoadedScenario,
};
use coupled_channels::spectra::{energy_floor, find_bound_states, BoundStateResult};
use coupled_channels::{Error, Scenario};

/// Default width of the bound-state window above its lower edge.
const DEFAULT_WINDOW: f64 = 10.0;

#[derive(Parser, Debug)]
#[command(name = "cchan", version, about = "Coupled-channel Schrödinger toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub e_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub e_max: Option<f64>,
    #[arg(long)]
    pub e_step: Option<f64>,
    /// Number of channels for reduced potentials.
    #[arg(long)]
    pub n_ch: Option<usize>,
    /// Energy tolerance for bound-state refinement.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the channel potential matrix and thresholds.
    Reduce(Common),
    /// Find bound states in an energy window.
    Solve(Common),
    /// Scattering at one energy.
    Scatter {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
    },
    /// Effective kinetic energy and coupling classification for one bound state.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Index of the state within the window, 0 for the lowest.
        #[arg(long, default_value_t = 0)]
        state: usize,
    },
    /// Channel-count convergence against the 2D finite-difference solver.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Points per axis of the 2D grid.
        #[arg(long, default_value_t = 201)]
        oracle_points: usize,
    },
    /// Scattering over an energy list.
    Sweep(Common),
}

#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Numerics(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Numerics(_) => 3,
        }
    }

    fn report(&self) {
        match self {
            Failure::Validation(lines) => lines.iter().for_each(|l| eprintln!("VALIDATION: {l}")),
            Failure::Numerics(m) => eprintln!("NUMERICS: {m}"),
            Failure::Io(m) => eprintln!("IO: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(v) => Failure::Validation(v),
            Error::Scenario(m) | Error::Domain(m) => Failure::Validation(vec![m]),
            Error::Io(io) => Failure::Io(io.to_string()),
            other => Failure::Numerics(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(vec![msg.into()])
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(f) => {
            f.report();
            f.exit_code()
        }
    }
}

/// Runs one subcommand and returns the files it wrote.
pub fn execute(cmd: &Command) -> Result<Vec<PathBuf>, Failure> {
    match cmd {
        Command::Reduce(c) => reduce(c),
        Command::Solve(c) => solve(c),
        Command::Scatter { common, energy } => scatter(common, *energy),
        Command::Diagnose { common, state } => diagnose(common, *state),
        Command::Oracle {
            common,
            oracle_points,
        } => oracle(common, *oracle_points),
        Command::Sweep(c) => sweep(c),
    }
}

fn load(c: &Common) -> Result<LoadedScenario, Failure> {
    if !c.scenario.exists() {
        return Err(Failure::Io(format!(
            "{}: no such file",
            c.scenario.display()
        )));
    }
    let mut l = load_scenario(&c.scenario, c.n_ch)?;
    if let Some(t) = c.tol {
        l.scenario.solver.energy_tol = t;
    }
    if let Some(s) = c.e_step {
        l.scenario.solver.e_step = s;
    }
    l.scenario.ensure_valid()?;
    Ok(l)
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |a| format!("{prefix}_{a}"))
}

fn bound_window(c: &Common, l: &LoadedScenario) -> (f64, f64) {
    let lo = c
        .e_min
        .or(l.e_min)
        .unwrap_or_else(|| energy_floor(&l.scenario));
    let hi = c.e_max.or(l.e_max).unwrap_or(lo + DEFAULT_WINDOW);
    (lo, hi)
}

fn reduce(c: &Common) -> Result<Vec<PathBuf>, Failure> {
    let l = load(c)?;
    let s = &l.scenario;
    let mut out = Output::new(&c.out)?;
    out.write("potential.csv", &potential_csv_string(&s.potential))?;
    let mut text = String::from("channel,label,threshold\n");
    for a in 0..s.n_channels() {
        let _ = writeln!(
            text,
            "{},{},{}",
            a + 1,
            s.channels.label(a),
            format_number(s.channels.threshold(a))
        );
    }
    out.write("channels.csv", &text)?;
    Ok(out.written)
}

fn state_csv(state: &BoundStateResult) -> String {
    let psi = &state.wavefunction;
    let n = psi.n_channels();
    let mut header = vec!["x".to_string()];
    header.extend(numbered("psi", n));
    let mut text = csv_line(&header);
    for i in 0..psi.grid().n_points() {
        let mut row = vec![format_number(psi.grid().point(i))];
        row.extend((0..n).map(|a| format_number(psi.get(i, a))));
        text.push_str(&csv_line(&row));
    }
    text
}

fn solve(c: &Common) -> Result<Vec<PathBuf>, Failure> {
    let l = load(c)?;
    let (lo, hi) = bound_window(c, &l);
    let states = find_bound_states(&l.scenario, lo, hi)?;
    let n = l.scenario.n_channels();
    let mut out = Output::new(&c.out)?;
    let mut header = vec!["index".to_string(), "energy".to_string()];
    header.extend(numbered("nodes", n));
    header.push("matching_residual".into());
    let mut text = csv_line(&header);
    for (k, st) in states.iter().enumerate() {
        let mut row = vec![k.to_string(), format_number(st.energy)];
        row.extend(st.nodes_per_channel.iter().map(|m| m.to_string()));
        row.push(format_number(st.matching_residual));
        text.push_str(&csv_line(&row));
    }
    out.write("states.csv", &text)?;
    for (k, st) in states.iter().enumerate() {
        out.write(&format!("state_{k}.csv"), &state_csv(st))?;
    }
    Ok(out.written)
}

fn scatter_header() -> String {
    "E,channel_in,channel_out,R2,T2,unitarity_defect\n".to_string()
}

fn scatter_rows(s: &Scenario, r: &ScatteringResult) -> String {
    let mut text = String::new();
    for (ia, &alpha) in r.open_channels.iter().enumerate() {
        for beta in 0..s.n_channels() {
            let left = r.open_channels.iter().position(|&c| c == beta);
            let right = r.open_right.iter().position(|&c| c == beta);
            if left.is_none() && right.is_none() {
                continue;
            }
            let r2 = left.map_or(0.0, |ib| r.reflection_probability(ib, ia));
            let t2 = right.map_or(0.0, |ib| r.transmission_probability(ib, ia));
            text.push_str(&csv_line(&[
                format_number(r.energy),
                (alpha + 1).to_string(),
                (beta + 1).to_string(),
                format_number(r2),
                format_number(t2),
                format_number(r.unitarity_defect),
            ]));
        }
    }
    text
}

fn scatter(c: &Common, energy: Option<f64>) -> Result<Vec<PathBuf>, Failure> {
    let l = load(c)?;
    let e = energy
        .or(l.energy)
        .ok_or_else(|| invalid("no scattering energy (use --energy or solver.energy)"))?;
    let r = solve_scattering(&l.scenario, e)?;
    let mut out = Output::new(&c.out)?;
    out.write(
        "scatter.csv",
        &(scatter_header() + &scatter_rows(&l.scenario, &r)),
    )?;
    Ok(out.written)
}

/// Energies `e_min + k·step` up to `e_max` inclusive.
pub fn energy_list(e_min: f64, e_max: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if !(step > 0.0) || !(e_min <= e_max) {
        return Err(invalid("sweep needs e_min <= e_max and e_step > 0"));
    }
    let n = ((e_max - e_min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| e_min + k as f64 * step).collect())
}

fn sweep(c: &Common) -> Result<Vec<PathBuf>, Failure> {
    let l = load(c)?;
    let (lo, hi) = match (c.e_min.or(l.e_min), c.e_max.or(l.e_max)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(invalid("sweep needs e_min and e_max")),
    };
    let energies = energy_list(lo, hi, l.scenario.solver.e_step)?;
    let results = coupled_channels::scattering::scattering_sweep(&l.scenario, &energies);
    let mut text = scatter_header();
    for (e, r) in energies.iter().zip(results) {
        match r {
            Ok(r) => text.push_str(&scatter_rows(&l.scenario, &r)),
            Err(err @ (Error::ThresholdProximity { .. } | Error::NoOpenChannel(_))) => {
                eprintln!("skipping E = {e}: {err}");
            }
            Err(err) => return Err(err.into()),
        }
    }
    let mut out = Output::new(&c.out)?;
    out.write("sweep.csv", &text)?;
    Ok(out.written)
}

fn diagnose(c: &Common, index: usize) -> Result<Vec<PathBuf>, Failure> {
    let l = load(c)?;
    let s = &l.scenario;
    let (lo, hi) = bound_window(c, &l);
    let states = find_bound_states(s, lo, hi)?;
    let state = states.get(index).ok_or_else(|| {
        Failure::Numerics(format!(
            "state {index} requested, {} bound states in [{lo}, {hi}]",
            states.len()
        ))
    })?;
    let psi = &state.wavefunction;
    let ekin = effective_kinetic_energy(s, psi)?;
    let diags = classify_coupling(s, psi)?;
    let n = s.n_channels();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();

    let mut header = vec!["x".to_string()];
    header.extend(numbered("psi", n));
    header.extend(numbered("ekin", n));
    header.extend(
        pairs
            .iter()
            .map(|(a, b)| format!("class_{}_{}", a + 1, b + 1)),
    );
    let mut text = csv_line(&header);
    let per_point = pairs.len();
    for i in 0..s.grid.n_points() {
        let mut row = vec![format_number(s.grid.point(i))];
        row.extend((0..n).map(|a| format_number(psi.get(i, a))));
        row.extend((0..n).map(|a| ekin.get(i, a).map(format_number).unwrap_or_default()));
        row.extend(
            diags[i * per_point..(i + 1) * per_point]
                .iter()
                .map(|d| d.classification.code().to_string()),
        );
        text.push_str(&csv_line(&row));
    }
    let mut inv = String::from("pair,x_start,x_end\n");
    for iv in detect_inversion_intervals(&diags) {
        let _ = writeln!(
            inv,
            "{}_{},{},{}",
            iv.target + 1,
            iv.source + 1,
            format_number(iv.x_start),
            format_number(iv.x_end)
        );
    }
    let mut out = Output::new(&c.out)?;
    out.write("diagnostics.csv", &text)?;
    out.write("inversions.csv", &inv)?;
    let undefined = diags
        .iter()
        .filter(|d| d.classification == Classification::Undefined)
        .count();
    println!(
        "state {index}: E = {}, undefined points {undefined}",
        format_number(state.energy)
    );
    Ok(out.written)
}

/// `1, 2, 4, ...` below `max`, then `max`.
pub fn channel_counts(max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k < max)
        .collect();
    v.push(max);
    v
}

fn oracle(c: &Common, points: usize) -> Result<Vec<PathBuf>, Failure> {
    let l = load(c)?;
    let recipe = l
        .recipe
        .as_ref()
        .ok_or_else(|| invalid("oracle needs a potential of kind \"reduce\""))?;
    let grid = l.scenario.grid;
    let study = convergence_study(recipe, &grid, &channel_counts(recipe.basis.n_functions))?;
    let g2 = Grid2D::new(
        (grid.x_min(), grid.x_max(), points),
        (recipe.basis.xi_min, recipe.basis.xi_max, points),
    )?;
    let e2d = solve_2d_eigen(&recipe.spec, &g2, 1)?[0];
    let mut text = String::from("n_ch,E0\n");
    for (n, e) in &study.rows {
        let _ = writeln!(text, "{n},{}", format_number(*e));
    }
    let _ = writeln!(text, "oracle2d,{}", format_number(e2d));
    let mut out = Output::new(&c.out)?;
    out.write("oracle.csv", &text)?;
    let last = study.rows.last().map(|r| r.1).unwrap_or(f64::NAN);
    println!(
        "monotone: {}, relative difference to 2D: {:.3e}",
        study.monotone,
        ((last - e2d) / e2d).abs()
    );
    Ok(out.written)
}
