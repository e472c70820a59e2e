//! `optimize` and `evaluate`, from a resolved configuration to files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use axiswim_core::optimize::{initial_stroke, optimize_stroke, StrokeMode, StrokeOptimum, StrokeSetup};
use axiswim_core::sqp::{IterationLog, SqpStatus};
use axiswim_core::stroke::{StrokeEvaluation, StrokeFunctional, StrokePath, TimeBasis};
use axiswim_core::ReducedModel;
use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::{self, LogWriter, Sample, SAMPLES_PER_SPAN, SHAPE_SPACE_SAMPLES};
use crate::config::{Resolved, RunConfig};

/// Command-line switches shared by `optimize` and `evaluate`.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub log_csv: Option<PathBuf>,
    pub dump_operators: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub name: &'static str,
    pub dim: usize,
    pub length_scale_mm: f64,
    pub displacement_scale_mm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub status: &'static str,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub feasibility_mm: f64,
    pub lambda: f64,
    pub function_evaluations: usize,
    pub gradient_evaluations: usize,
    pub min_hessian_eigenvalue: Option<f64>,
    pub initial_energy_pj: f64,
    pub initial_displacement_mm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropulsionReport {
    pub max_phi_dot_mm_s: f64,
    pub min_phi_dot_mm_s: f64,
    /// Fraction of the period with `φ̇ > 0`.
    pub forward_fraction: f64,
    /// `|φ̇(T) − φ̇(0)|` over the peak `|φ̇|`.
    pub seam_jump: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub converged: bool,
    pub energy_pj: f64,
    pub displacement_mm: f64,
    pub target_displacement_mm: f64,
    pub period_s: f64,
    pub family: FamilyReport,
    pub propulsion: PropulsionReport,
    pub solver: Option<SolverReport>,
    pub runtime_s: f64,
    pub config: RunConfig,
}

/// What a run produced, for the caller to pick an exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub stroke: StrokePath,
    pub out_dir: PathBuf,
}

fn status_name(s: SqpStatus) -> &'static str {
    match s {
        SqpStatus::Converged => "converged",
        SqpStatus::MaxIterations => "max_iterations",
        SqpStatus::LineSearchFailure => "line_search_failure",
        SqpStatus::SingularKkt => "singular_kkt",
    }
}

pub fn functional(resolved: &Resolved) -> StrokeFunctional {
    StrokeFunctional::new(ReducedModel::new(resolved.family.clone(), resolved.config.viscosity_mpa_s))
}

fn out_dir(resolved: &Resolved, flags: &Flags) -> PathBuf {
    flags
        .out_dir
        .clone()
        .or_else(|| resolved.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("swimctl-out"))
}

pub fn time_basis(setup: &StrokeSetup) -> TimeBasis {
    match setup.mode {
        StrokeMode::Free => TimeBasis::Periodic,
        StrokeMode::FixedInitial(_) => TimeBasis::Clamped,
    }
}

/// Moves every free coefficient by up to `1e-3` of the box width, keeping
/// it inside the bounds. Seed 0 leaves the stroke alone.
pub fn perturb(stroke: &StrokePath, setup: &StrokeSetup, seed: u64) -> Result<StrokePath> {
    if seed == 0 {
        return Ok(stroke.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, q) = (stroke.dim(), stroke.controls());
    let (lo, hi) = &setup.bounds;
    let pinned = |alpha: usize| stroke.kind() == TimeBasis::Clamped && (alpha == 0 || alpha + 1 == q);
    let coeffs = stroke
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (alpha, i) = (k / n, k % n);
            if pinned(alpha) {
                return v;
            }
            let width = hi[i] - lo[i];
            (v + 1e-3 * width * rng.gen_range(-1.0..1.0)).clamp(lo[i], hi[i])
        })
        .collect();
    Ok(stroke.with_coeffs(coeffs)?)
}

fn propulsion(samples: &[Sample]) -> PropulsionReport {
    let max = samples.iter().map(|s| s.phi_dot).fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().map(|s| s.phi_dot).fold(f64::INFINITY, f64::min);
    let peak = max.abs().max(min.abs());
    // the last sample repeats t = 0 on the next period
    let body = &samples[..samples.len() - 1];
    let forward = body.iter().filter(|s| s.phi_dot > 0.0).count() as f64 / body.len() as f64;
    let jump = (samples[samples.len() - 1].phi_dot - samples[0].phi_dot).abs();
    PropulsionReport {
        max_phi_dot_mm_s: max,
        min_phi_dot_mm_s: min,
        forward_fraction: forward,
        seam_jump: if peak > 0.0 { jump / peak } else { 0.0 },
    }
}

fn write_all(
    resolved: &Resolved,
    functional: &StrokeFunctional,
    stroke: &StrokePath,
    dir: &Path,
    dump_operators: bool,
) -> Result<PropulsionReport> {
    let samples = artifacts::sample_stroke(functional, stroke, SAMPLES_PER_SPAN)?;
    artifacts::write_samples(&dir.join("stroke.csv"), &samples)?;
    artifacts::write_coefficients(&dir.join("stroke_coefficients.csv"), stroke)?;
    artifacts::write_shape_space(&dir.join("shape_space.csv"), stroke, SHAPE_SPACE_SAMPLES)?;
    artifacts::write_snapshots(&dir.join("snapshots"), resolved.family.as_ref(), &samples)?;
    if dump_operators {
        let (xi, _) = stroke.eval(0.0)?;
        let (_, op) = functional.model().operator(&xi, 0.0).context("assembling the operator at t = 0")?;
        artifacts::write_operators(&dir.join("operators"), &op)?;
    }
    Ok(propulsion(&samples))
}

fn family_report(resolved: &Resolved) -> FamilyReport {
    let f = &resolved.family;
    FamilyReport { name: f.name(), dim: f.dim(), length_scale_mm: f.length_scale(), displacement_scale_mm: f.displacement_scale() }
}

fn report(
    command: &'static str,
    resolved: &Resolved,
    evaluation: &StrokeEvaluation,
    propulsion: PropulsionReport,
    solver: Option<SolverReport>,
    started: Instant,
) -> Report {
    Report {
        command,
        converged: solver.as_ref().map_or(true, |s| s.status == "converged"),
        energy_pj: evaluation.energy,
        displacement_mm: evaluation.displacement,
        target_displacement_mm: resolved.setup.target,
        period_s: resolved.setup.period,
        family: family_report(resolved),
        propulsion,
        solver,
        runtime_s: started.elapsed().as_secs_f64(),
        config: resolved.config.clone(),
    }
}

/// Solves for the optimal stroke and writes every artifact, converged or
/// not.
pub fn optimize(resolved: &Resolved, flags: &Flags) -> Result<Outcome> {
    let started = Instant::now();
    let dir = out_dir(resolved, flags);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let functional = functional(resolved);
    let setup = &resolved.setup;
    let start = if setup.target == 0.0 {
        None
    } else {
        Some(perturb(&initial_stroke(&functional, setup)?, setup, flags.seed)?)
    };
    let mut log = flags.log_csv.as_deref().map(LogWriter::create).transpose()?;
    let mut log_error = None;
    let mut observer = |h: &IterationLog| {
        if let Some(w) = log.as_mut() {
            if let Err(e) = w.record(h) {
                log_error.get_or_insert(e);
            }
        }
    };
    let opt: StrokeOptimum = optimize_stroke(&functional, setup, start, &resolved.solver, &mut observer)?;
    if let Some(e) = log_error {
        return Err(e.into());
    }
    let initial = functional.evaluate(&opt.initial, false)?;
    let propulsion = write_all(resolved, &functional, &opt.path, &dir, flags.dump_operators)?;
    let r = &opt.report;
    let solver = SolverReport {
        status: status_name(r.status),
        iterations: r.iterations,
        kkt_residual: r.stationarity,
        feasibility_mm: r.feasibility,
        lambda: opt.lambda,
        function_evaluations: r.function_evaluations,
        gradient_evaluations: r.gradient_evaluations,
        min_hessian_eigenvalue: r.min_hessian_eigenvalue.is_finite().then_some(r.min_hessian_eigenvalue),
        initial_energy_pj: initial.energy,
        initial_displacement_mm: initial.displacement,
        seed: flags.seed,
    };
    let report = report("optimize", resolved, &opt.evaluation, propulsion, Some(solver), started);
    artifacts::write_json(&dir.join("report.json"), &report)?;
    Ok(Outcome { report, stroke: opt.path, out_dir: dir })
}

/// Energy, displacement and propulsion diagram of a stored stroke.
pub fn evaluate(resolved: &Resolved, stroke_file: &Path, flags: &Flags) -> Result<Outcome> {
    let started = Instant::now();
    let dir = out_dir(resolved, flags);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let setup = &resolved.setup;
    let stroke = artifacts::read_stroke(stroke_file, time_basis(setup), setup.controls, setup.period, resolved.family.dim())?;
    let (lo, hi) = &setup.bounds;
    for (k, v) in stroke.coeffs().iter().enumerate() {
        let i = k % lo.len();
        let slack = 1e-9 * (hi[i] - lo[i]);
        if !(*v >= lo[i] - slack && *v <= hi[i] + slack) {
            anyhow::bail!("{}: coefficient {} of ξ{} is {v}, outside [{}, {}]", stroke_file.display(), k / lo.len(), i + 1, lo[i], hi[i]);
        }
    }
    let functional = functional(resolved);
    let evaluation = functional.evaluate(&stroke, false)?;
    let propulsion = write_all(resolved, &functional, &stroke, &dir, flags.dump_operators)?;
    let report = report("evaluate", resolved, &evaluation, propulsion, None, started);
    artifacts::write_json(&dir.join("report.json"), &report)?;
    Ok(Outcome { report, stroke, out_dir: dir })
}
