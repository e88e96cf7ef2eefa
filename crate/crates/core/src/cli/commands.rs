use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EXIT_BLOWUP, EXIT_FAIL, EXIT_OK, OUT_ENV};
use crate::error::{invalid, Error, Result};
use crate::evolve::{run, BlowupVerdict, RunStatus, SolverConfig, Trajectory};
use crate::field::{Field, GraphField, GraphGrid, GridSpec, LineField, LineGrid};
use crate::functionals::energy_terms;
use crate::io::fmt_g17;
use crate::model::{ModelSpec, VertexCondition};
use crate::scenario::{Analysis, InitialData, RadiusSpec, Scenario};
use crate::soliton::ground_state_flow_with;
use crate::virial::{report, RadiusChoice, VirialReport};
use crate::weight::WeightProfile;

use super::GsModel;

/// `$VIRIALLAB_OUT` if set, else `runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn weight_check(samples: usize, profile: Option<&Path>, out: Option<&Path>, dump: Option<&Path>) -> Result<i32> {
    let p = match profile {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<WeightProfile>(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => WeightProfile::certified(),
    };
    let rep = p.verify(samples)?;
    match out {
        Some(path) => write_json(path, &rep)?,
        None => println!("{}", serde_json::to_string_pretty(&rep)?),
    }
    if let Some(path) = dump {
        let mut w = create(path)?;
        p.dump_csv(&mut w, 6001)?;
        w.flush()?;
    }
    for c in rep.failures() {
        eprintln!("check failed: {} (margin {:e} at {:?})", c.name, c.worst_margin, c.location);
    }
    Ok(if rep.all_passed { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub model: String,
    pub verdict: BlowupVerdict,
    pub steps: usize,
    pub t_final: f64,
    pub r: f64,
    pub mass0: f64,
    pub energy0: f64,
    /// `max |M(t) - M(0)| / M(0)` over snapshots.
    pub mass_drift: f64,
    /// `max |E(t) - E(0)|` over snapshots.
    pub energy_drift: f64,
    pub snapshot_times: Vec<f64>,
}

fn write_trajectory(dir: &Path, s: &Scenario, traj: &Trajectory, r: f64) -> Result<RunSummary> {
    fs::create_dir_all(dir.join("snapshots"))?;
    write_json(&dir.join("scenario.json"), s)?;
    let mut series = create(&dir.join("series.csv"))?;
    writeln!(series, "t,mass,energy,grad_norm,tail_mass")?;
    for (k, f) in traj.snapshots.iter().enumerate() {
        writeln!(
            series,
            "{},{},{},{},{}",
            fmt_g17(traj.times[k]),
            fmt_g17(traj.mass_series[k]),
            fmt_g17(traj.energy_series[k]),
            fmt_g17(traj.grad_series[k]),
            fmt_g17(f.tail_mass(r)?)
        )?;
        let mut w = create(&dir.join("snapshots").join(format!("{k:04}.csv")))?;
        f.write_csv(&mut w)?;
        w.flush()?;
    }
    series.flush()?;
    let (m0, e0) = (traj.mass_series[0], traj.energy_series[0]);
    let summary = RunSummary {
        name: s.name.clone(),
        model: s.model.label().to_string(),
        verdict: traj.verdict.clone(),
        steps: traj.steps,
        t_final: *traj.times.last().expect("trajectory has a first snapshot"),
        r,
        mass0: m0,
        energy0: e0,
        mass_drift: traj.mass_series.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.max(f64::MIN_POSITIVE),
        energy_drift: traj.energy_series.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max),
        snapshot_times: traj.times.clone(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn simulate(path: &Path, out: Option<&Path>) -> Result<i32> {
    let s = Scenario::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let u0 = s.initial_field(base)?;
    let choice = s.radius(&u0)?;
    let traj = run(&u0, &s.model, &s.solver_config())?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| output_root().join(&s.name));
    let summary = write_trajectory(&dir, &s, &traj, choice.r)?;
    eprintln!(
        "{}: {:?} at t = {} after {} steps",
        s.name,
        summary.verdict.status,
        summary.verdict.t_detect.unwrap_or(summary.t_final),
        summary.steps
    );
    Ok(match summary.verdict.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::BlowupDetected => EXIT_BLOWUP,
        RunStatus::Aborted => EXIT_FAIL,
    })
}

/// Rebuilds a trajectory from a `simulate` output directory.
pub fn load_trajectory(dir: &Path) -> Result<(Scenario, Trajectory)> {
    let missing = |what: &str| Error::InvalidArgument(format!("{}: missing {what}", dir.display()));
    let s = Scenario::load(&dir.join("scenario.json")).map_err(|_| missing("scenario.json"))?;
    let text = fs::read_to_string(dir.join("summary.json")).map_err(|_| missing("summary.json"))?;
    let summary: RunSummary = serde_json::from_str(&text)?;
    let mut snapshots = Vec::with_capacity(summary.snapshot_times.len());
    for k in 0..summary.snapshot_times.len() {
        let p = dir.join("snapshots").join(format!("{k:04}.csv"));
        let rd = BufReader::new(File::open(&p).map_err(|_| missing(&format!("snapshot {}", p.display())))?);
        let f = match s.grid {
            GridSpec::Line(_) => Field::Line(LineField::read_csv(rd)?),
            GridSpec::Graph(g) => Field::Graph(GraphField::read_csv(rd, g.shared_vertex)?),
        };
        snapshots.push(f);
    }
    if snapshots.len() < 3 {
        return invalid(format!("{}: virial report needs at least 3 snapshots, found {}", dir.display(), snapshots.len()));
    }
    let traj = Trajectory {
        model: s.model.clone(),
        config: s.solver_config(),
        times: summary.snapshot_times,
        snapshots,
        mass_series: Vec::new(),
        energy_series: Vec::new(),
        grad_series: Vec::new(),
        verdict: summary.verdict,
        steps: summary.steps,
    };
    Ok((s, traj))
}

#[derive(Clone, Debug, Serialize)]
struct VirialSummary<'a> {
    r: f64,
    r_source: &'static str,
    eta: f64,
    eta_tilde: f64,
    energy0: f64,
    mass0: f64,
    i0: f64,
    iprime0: f64,
    max_residual: f64,
    tol: f64,
    inequality_violations: usize,
    sign_violations: usize,
    envelope_root: Option<f64>,
    clauses: &'a RadiusChoice,
    eta_tilde_positive: bool,
    smallness_holds: bool,
    passed: bool,
}

pub fn virial_report(dir: &Path, r: Option<RadiusSpec>, tol: f64) -> Result<i32> {
    if !(tol > 0.0) {
        return invalid(format!("tol must be positive, got {tol}"));
    }
    let (mut s, traj) = load_trajectory(dir)?;
    if let Some(r) = r {
        s.analysis = Analysis { r, ..s.analysis };
    }
    let choice = s.radius(&traj.snapshots[0])?;
    let rep: VirialReport = report(&traj, choice.r, &s.model)?;
    let mut w = create(&dir.join("virial_report.csv"))?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    let passed = rep.max_residual < tol && rep.violations == 0;
    let summary = VirialSummary {
        r: rep.r,
        r_source: if s.analysis.r == RadiusSpec::Auto { "auto" } else { "fixed" },
        eta: rep.eta,
        eta_tilde: rep.eta_tilde,
        energy0: rep.energy0,
        mass0: rep.mass0,
        i0: rep.i0,
        iprime0: rep.iprime0,
        max_residual: rep.max_residual,
        tol,
        inequality_violations: rep.violations,
        sign_violations: rep.sign_violations,
        envelope_root: rep.envelope_root,
        clauses: &choice,
        eta_tilde_positive: choice.eta_tilde_positive(),
        smallness_holds: choice.smallness_holds(),
        passed,
    };
    write_json(&dir.join("virial_summary.json"), &summary)?;
    eprintln!(
        "R = {}: max residual {:e}, {} inequality violations, {} sign violations",
        rep.r, rep.max_residual, rep.violations, rep.sign_violations
    );
    Ok(if passed { EXIT_OK } else { EXIT_FAIL })
}

fn default_scan_scenario() -> Scenario {
    Scenario {
        name: "scan".into(),
        model: ModelSpec::free(),
        initial_data: InitialData::ScaledSoliton { lambda: 1.0, omega: 1.0 },
        grid: GridSpec::Line(LineGrid { half_width: 16.0, n: 4096, stagger: false }),
        solver: SolverConfig { t_end: 2.0, snapshot_stride: 1000, ..Default::default() },
        analysis: Analysis { r: RadiusSpec::Value(8.0), snapshot_dt: None },
    }
}

/// Evenly spaced `λ` values including both ends.
pub fn scan_lambdas(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return invalid(format!("steps must be at least 2, got {steps}"));
    }
    if !(min > 0.0 && max > min && max.is_finite()) {
        return invalid(format!("need 0 < lambda_min < lambda_max, got [{min}, {max}]"));
    }
    Ok((0..steps).map(|k| min + (max - min) * k as f64 / (steps - 1) as f64).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub lambda: f64,
    pub energy: f64,
    pub verdict: BlowupVerdict,
}

/// Runs `base` with `λQ_ω` data for each `λ`, in parallel; rows keep the input order.
pub fn scan(base: &Scenario, base_dir: &Path, lambdas: &[f64]) -> Result<Vec<ScanRow>> {
    let omega = match base.initial_data {
        InitialData::ScaledSoliton { omega, .. } => omega,
        _ => return invalid("blow-up scan needs scaled_soliton initial data"),
    };
    lambdas
        .par_iter()
        .map(|&lambda| {
            let mut s = base.clone();
            s.initial_data = InitialData::ScaledSoliton { lambda, omega };
            let u0 = s.initial_field(base_dir)?;
            let energy = energy_terms(&u0, &s.model)?.total();
            let traj = run(&u0, &s.model, &s.solver_config())?;
            Ok(ScanRow { lambda, energy, verdict: traj.verdict })
        })
        .collect()
}

pub fn blowup_scan(min: f64, max: f64, steps: usize, scenario: Option<&Path>, out: Option<&Path>) -> Result<i32> {
    let lambdas = scan_lambdas(min, max, steps)?;
    let (base, base_dir) = match scenario {
        Some(p) => (Scenario::load(p)?, p.parent().unwrap_or(Path::new(".")).to_path_buf()),
        None => (default_scan_scenario(), PathBuf::from(".")),
    };
    let rows = scan(&base, &base_dir, &lambdas)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| output_root().join(format!("{}_scan", base.name))).join("scan.csv");
    let mut w = create(&path)?;
    writeln!(w, "lambda,energy,verdict,t_detect")?;
    for row in &rows {
        let status = match row.verdict.status {
            RunStatus::Completed => "completed",
            RunStatus::BlowupDetected => "blowup_detected",
            RunStatus::Aborted => "aborted",
        };
        let t = row.verdict.t_detect.map(fmt_g17).unwrap_or_default();
        writeln!(w, "{},{},{},{}", fmt_g17(row.lambda), fmt_g17(row.energy), status, t)?;
    }
    w.flush()?;
    eprintln!("wrote {}", path.display());
    Ok(EXIT_OK)
}

pub struct GsArgs {
    pub model: GsModel,
    pub gamma: f64,
    pub mu: f64,
    pub edges: usize,
    pub omega: f64,
    pub tol: f64,
    pub length: f64,
    pub n: usize,
    pub max_iter: usize,
}

#[derive(Serialize)]
struct GsRecord {
    model: ModelSpec,
    omega: f64,
    gamma: Option<f64>,
    mu: Option<f64>,
    residual: f64,
    iterations: usize,
    mass: f64,
    energy: f64,
    /// Measured `φ'(0+) - φ'(0-)` and `γφ(0)`.
    vertex_jump: Option<(f64, f64)>,
}

pub fn ground_state(a: GsArgs, out: Option<&Path>) -> Result<i32> {
    if !(a.tol > 0.0) {
        return invalid(format!("tol must be positive, got {}", a.tol));
    }
    let graph = |shared: bool| GraphGrid::new(a.edges, a.length, a.n, shared).map(GridSpec::Graph);
    let (model, grid, gamma, mu) = match a.model {
        GsModel::Free => (ModelSpec::free(), GridSpec::Line(LineGrid::new(a.length, a.n, false)?), None, None),
        GsModel::InversePower => {
            (ModelSpec::inverse_power(a.gamma, a.mu), GridSpec::Line(LineGrid::new(a.length, a.n, true)?), Some(a.gamma), Some(a.mu))
        }
        GsModel::Delta => (ModelSpec::delta(a.gamma), GridSpec::Line(LineGrid::new(a.length, a.n, false)?), Some(a.gamma), None),
        GsModel::GraphKirchhoff => (ModelSpec::graph(VertexCondition::Kirchhoff), graph(true)?, None, None),
        GsModel::GraphDelta => (ModelSpec::graph(VertexCondition::DiracDelta { gamma: a.gamma }), graph(true)?, Some(a.gamma), None),
        GsModel::GraphDeltaPrime => {
            (ModelSpec::graph(VertexCondition::DeltaPrime { gamma: a.gamma }), graph(false)?, Some(a.gamma), None)
        }
    };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| output_root().join(format!("ground_state_{}", model.label())));
    let gs = ground_state_flow_with(&model, a.omega, &grid, a.tol, a.max_iter)?;
    let mut w = create(&dir.join("profile.csv"))?;
    gs.field.write_csv(&mut w)?;
    w.flush()?;
    let rec = GsRecord {
        model,
        omega: gs.omega,
        gamma,
        mu,
        residual: gs.residual,
        iterations: gs.iterations,
        mass: gs.mass,
        energy: gs.energy,
        vertex_jump: gs.vertex_jump,
    };
    write_json(&dir.join("ground_state.json"), &rec)?;
    eprintln!("residual {:e} after {} iterations; mass {}, energy {}", gs.residual, gs.iterations, gs.mass, gs.energy);
    Ok(EXIT_OK)
}
