//! The four front-end operations on a scenario: simulate, check, modes and
//! validate.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use super::output::{to_json, trajectory_csv, write_file, StateSnapshot};
use super::ScenarioConfig;
use crate::assembly::{assemble, schur_check, SchurReport};
use crate::error::{Error, Result};
use crate::integrator::{integrate, Dynamics};
use crate::modal::{axial_frequency, bending_frequency};
use crate::validation::{
    energy_audit, property_suites, work_balance, EnergyAudit, OracleReport, WorkBalance,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Check,
    Modes,
    Validate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub step: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out: PathBuf::from("."),
            step: None,
            t_end: None,
            seed: 0,
        }
    }
}

/// What a command printed and wrote. `success` is false when a simulation
/// failed part-way or a check or validation did not pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub stdout: String,
    pub files: Vec<PathBuf>,
    pub success: bool,
}

pub fn run(command: Command, config: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport> {
    let mut config = config.clone();
    if let Some(h) = opts.step {
        config.integrator.step = h;
    }
    if let Some(t) = opts.t_end {
        config.integrator.t_end = t;
    }
    let issues = config.issues();
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    std::fs::create_dir_all(&opts.out).map_err(|source| Error::Io {
        path: opts.out.clone(),
        source,
    })?;
    let mut report = RunReport {
        success: true,
        ..Default::default()
    };
    match command {
        Command::Simulate => simulate(&config, opts, &mut report)?,
        Command::Check => check(&config, opts, &mut report)?,
        Command::Modes => modes(&config, opts, &mut report)?,
        Command::Validate => validate(opts, &mut report)?,
    }
    Ok(report)
}

impl RunReport {
    fn write(&mut self, opts: &RunOptions, name: &str, contents: &str) -> Result<()> {
        let path = opts.out.join(name);
        write_file(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    status: &'static str,
    error: Option<String>,
    seed: u64,
    steps: usize,
    records: usize,
    final_state: StateSnapshot,
    max_solve_residual: f64,
    max_velocity_residual: f64,
    max_position_residual: f64,
    energy: EnergyAudit,
    work: WorkBalance,
    wall_time_s: f64,
    config: &'a ScenarioConfig,
}

fn simulate(config: &ScenarioConfig, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let start = Instant::now();
    let (chain, initial) = config.build()?;
    let dynamics = Dynamics::new(&chain, |t| config.wrenches(t));
    let outcome = integrate(&dynamics, &initial, &config.integrator_config(), |_| {});
    let traj = &outcome.trajectory;
    report.write(opts, &config.output.csv, &trajectory_csv(&chain, traj))?;

    let final_state = match &outcome.failure {
        Some(f) => StateSnapshot::new(f.state.t, &f.state.links),
        None => traj.records.last().map_or_else(
            || StateSnapshot::new(initial.t, &initial.links),
            |r| StateSnapshot::new(r.t, &r.links),
        ),
    };
    let energies: Vec<_> = traj.records.iter().map(|r| r.energy).collect();
    let work: Vec<_> = traj.records.iter().map(|r| r.work).collect();
    let max_velocity_residual = traj
        .records
        .iter()
        .flat_map(|r| r.residuals.iter().copied())
        .fold(0.0, f64::max);
    let mut max_position_residual = 0.0_f64;
    for r in &traj.records {
        for j in chain.joint_residuals(&r.links)? {
            max_position_residual = max_position_residual.max(j.position.norm());
        }
    }
    let summary = Summary {
        status: if outcome.failure.is_some() {
            "failed"
        } else {
            "ok"
        },
        error: outcome.failure.as_ref().map(|f| f.error.to_string()),
        seed: opts.seed,
        steps: traj.steps,
        records: traj.records.len(),
        final_state,
        max_solve_residual: traj.max_solve_residual,
        max_velocity_residual,
        max_position_residual,
        energy: energy_audit(&energies),
        work: work_balance(&energies, &work),
        wall_time_s: start.elapsed().as_secs_f64(),
        config,
    };
    report.write(opts, &config.output.summary, &to_json(&summary))?;
    let _ = writeln!(
        report.stdout,
        "{} steps, {} records, max solve residual {:.3e}",
        traj.steps,
        traj.records.len(),
        traj.max_solve_residual
    );
    if let Some(f) = &outcome.failure {
        report.write(
            opts,
            "failure_state.json",
            &to_json(&StateSnapshot::new(f.state.t, &f.state.links)),
        )?;
        let _ = writeln!(report.stdout, "{}", f.error);
        report.success = false;
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckReport {
    schur: SchurReport,
    dimension: usize,
    rank: usize,
    constraint_equations: usize,
    max_velocity_residual: f64,
    max_position_residual: f64,
    well_posed: bool,
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let tol = sv.max() * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

fn check(config: &ScenarioConfig, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let (chain, initial) = config.build()?;
    let m = assemble(&chain, &initial.links, &config.wrenches(0.0))?;
    let schur = schur_check(&m);
    let residuals = chain.joint_residuals(&initial.links)?;
    let m_sys = m.m_sys();
    let rank = numerical_rank(&m_sys);
    // Projected end loads populate the wrench columns.
    let end_loads = chain.links.iter().any(|l| l.opts.modal_end_loads);
    let out = CheckReport {
        dimension: m.dim(),
        rank,
        constraint_equations: chain.joints.iter().map(|j| 6 - j.released()).sum(),
        max_velocity_residual: residuals
            .iter()
            .map(|r| r.velocity.norm())
            .fold(0.0, f64::max),
        max_position_residual: residuals
            .iter()
            .map(|r| r.position.norm())
            .fold(0.0, f64::max),
        well_posed: !schur.singular && rank == m.dim() && (schur.wrench_columns_zero || end_loads),
        schur,
    };
    let s = &mut report.stdout;
    let _ = writeln!(s, "system dimension     {}", out.dimension);
    let _ = writeln!(s, "numerical rank       {}", out.rank);
    let _ = writeln!(s, "constraint equations {}", out.constraint_equations);
    let _ = writeln!(s, "cond(M_sys)          {:.3e}", out.schur.condition_m_sys);
    let _ = writeln!(s, "cond(M_q)            {:.3e}", out.schur.condition_m_q);
    let _ = writeln!(s, "cond(S)              {:.3e}", out.schur.condition_schur);
    let _ = writeln!(
        s,
        "det identity         {:.3e} vs {:.3e}",
        out.schur.det_m_sys,
        out.schur.det_m_q * out.schur.det_schur
    );
    let _ = writeln!(s, "wrench columns zero  {}", out.schur.wrench_columns_zero);
    let _ = writeln!(
        s,
        "joint residuals      velocity {:.3e}, position {:.3e}",
        out.max_velocity_residual, out.max_position_residual
    );
    let _ = writeln!(s, "well posed           {}", out.well_posed);
    report.success = out.well_posed;
    report.write(opts, "check.json", &to_json(&out))
}

#[derive(Serialize)]
struct ModeRow {
    link: usize,
    family: &'static str,
    mode: usize,
    wavenumber_length: f64,
    omega: f64,
    hz: f64,
}

fn modes(config: &ScenarioConfig, opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let (chain, _) = config.build()?;
    let mut rows = Vec::new();
    for (i, m) in chain.links.iter().enumerate() {
        let p = &m.params;
        let l = p.length();
        for (k, &kx) in m.basis.axial_wavenumbers().iter().enumerate() {
            rows.push((i, "axial", k, kx * l, axial_frequency(kx, p.e, p.rho)));
        }
        for (k, &b) in m.basis.bending_wavenumbers().iter().enumerate() {
            rows.push((
                i,
                "bending-y",
                k,
                b * l,
                bending_frequency(b, p.e * p.iz, p.rho_a()),
            ));
            rows.push((
                i,
                "bending-z",
                k,
                b * l,
                bending_frequency(b, p.e * p.iy, p.rho_a()),
            ));
        }
    }
    let rows: Vec<ModeRow> = rows
        .into_iter()
        .map(|(link, family, mode, wavenumber_length, omega)| ModeRow {
            link: link + 1,
            family,
            mode: mode + 1,
            wavenumber_length,
            omega,
            hz: omega / (2.0 * std::f64::consts::PI),
        })
        .collect();
    let _ = writeln!(
        report.stdout,
        "{:>4}  {:<9}  {:>4}  {:>12}  {:>14}  {:>12}",
        "link", "family", "mode", "k·l", "ω (rad/s)", "f (Hz)"
    );
    for r in &rows {
        let _ = writeln!(
            report.stdout,
            "{:>4}  {:<9}  {:>4}  {:>12.6}  {:>14.4}  {:>12.4}",
            r.link, r.family, r.mode, r.wavenumber_length, r.omega, r.hz
        );
    }
    report.write(opts, "modes.json", &to_json(&rows))
}

fn validate(opts: &RunOptions, report: &mut RunReport) -> Result<()> {
    let suites: Vec<OracleReport> = property_suites(opts.seed);
    for s in &suites {
        let _ = writeln!(
            report.stdout,
            "{:<24} {}  ({:.2} s)",
            s.name,
            if s.pass { "PASS" } else { "FAIL" },
            s.runtime_s
        );
        for m in &s.metrics {
            let _ = writeln!(
                report.stdout,
                "    {:<36} {:.3e}  {:?}",
                m.name, m.value, m.bound
            );
        }
    }
    report.success = suites.iter().all(|s| s.pass);
    report.write(opts, "validation.json", &to_json(&suites))
}
