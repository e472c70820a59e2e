//! Data files written by a run and read back by `evaluate`.
//!
//! | file | columns |
//! |---|---|
//! | `stroke.csv` | `t, xi_1..xi_N, xi_dot_1..xi_dot_N, phi_dot, phi` |
//! | `stroke_coefficients.csv` | `alpha, xi_1..xi_N` |
//! | `shape_space.csv` | `t, xi_1..xi_N` |
//! | `snapshots/snapshot_KK.csv` | `patch, s, x, sigma` |
//! | `operators/{A,M}.csv` | `row, col, value` |
//! | `iterations.csv` | see [`LOG_HEADER`] |
//!
//! Times are in s, lengths in mm, `phi_dot` in mm/s.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use axiswim_core::quadrature::gauss_legendre;
use axiswim_core::sqp::IterationLog;
use axiswim_core::stroke::{StrokeError, StrokeFunctional, StrokePath, TimeBasis};
use axiswim_core::{BoundaryOperator, ShapeFamily};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Stroke(#[from] StrokeError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv { path: path.to_path_buf(), source }
}

fn format(path: &Path, reason: impl Into<String>) -> ArtifactError {
    ArtifactError::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Rows per time-basis span in `stroke.csv`.
pub const SAMPLES_PER_SPAN: usize = 8;
/// Rows of `shape_space.csv`.
pub const SHAPE_SPACE_SAMPLES: usize = 1001;
/// Snapshots per period, taken at `t = kT/8`.
pub const SNAPSHOTS: usize = 8;
/// Generator-curve samples per patch in a snapshot.
pub const SNAPSHOT_POINTS: usize = 200;

pub const LOG_HEADER: [&str; 11] = [
    "iteration",
    "objective",
    "constraint",
    "abs_constraint",
    "kkt_residual",
    "step_norm",
    "alpha",
    "merit",
    "penalty",
    "lambda",
    "free_variables",
];

/// One row of the propulsion diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub xi: Vec<f64>,
    pub xi_dot: Vec<f64>,
    pub phi_dot: f64,
    /// Distance travelled since `t = 0`.
    pub phi: f64,
}

/// Uniform samples of the stroke with `φ̇ = V·ξ̇`, and `φ` accumulated by a
/// 4-point Gauss rule between neighbouring samples.
pub fn sample_stroke(functional: &StrokeFunctional, path: &StrokePath, per_span: usize) -> Result<Vec<Sample>, StrokeError> {
    let model = functional.model();
    let count = path.basis().spans().len() * per_span;
    let period = path.period();
    let times: Vec<f64> = (0..=count).map(|k| period * k as f64 / count as f64).collect();
    let rule = gauss_legendre(4);
    let mut all = times.clone();
    for w in times.windows(2) {
        all.extend(rule.iter().map(|(x, _)| w[0] + x * (w[1] - w[0])));
    }
    let states: Vec<(Vec<f64>, Vec<f64>)> = all.iter().map(|&t| path.eval(t)).collect::<Result<_, _>>()?;
    let shapes: Vec<Vec<f64>> = states.iter().map(|s| s.0.clone()).collect();
    let coeffs = model.path(&shapes);
    let mut rate = Vec::with_capacity(all.len());
    for (r, (_, xi_dot)) in coeffs.into_iter().zip(&states) {
        let r = r?;
        rate.push(r.v.iter().zip(xi_dot).map(|(v, d)| v * d).sum::<f64>());
    }
    let mut phi = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let h = times[k] - times[k - 1];
            let base = times.len() + (k - 1) * rule.len();
            phi += h * rule.iter().enumerate().map(|(j, (_, w))| w * rate[base + j]).sum::<f64>();
        }
        let (xi, xi_dot) = states[k].clone();
        out.push(Sample { t, xi, xi_dot, phi_dot: rate[k], phi });
    }
    Ok(out)
}

fn shape_header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn num(v: f64) -> String {
    // shortest representation that parses back to the same bits
    format!("{v:e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>, ArtifactError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    csv::Writer::from_path(path).map_err(csv_err(path))
}

pub fn write_samples(path: &Path, samples: &[Sample]) -> Result<(), ArtifactError> {
    let n = samples.first().map_or(0, |s| s.xi.len());
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(shape_header("xi", n))
        .chain(shape_header("xi_dot", n))
        .chain(["phi_dot".to_string(), "phi".to_string()])
        .collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for s in samples {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.xi.iter().copied())
            .chain(s.xi_dot.iter().copied())
            .chain([s.phi_dot, s.phi])
            .map(num)
            .collect();
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_coefficients(path: &Path, stroke: &StrokePath) -> Result<(), ArtifactError> {
    let n = stroke.dim();
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("alpha".to_string()).chain(shape_header("xi", n)).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for (alpha, c) in stroke.coeffs().chunks(n).enumerate() {
        let row: Vec<String> = std::iter::once(alpha.to_string()).chain(c.iter().map(|v| num(*v))).collect();
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_shape_space(path: &Path, stroke: &StrokePath, count: usize) -> Result<(), ArtifactError> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain(shape_header("xi", stroke.dim())).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for k in 0..count {
        let t = stroke.period() * k as f64 / (count - 1) as f64;
        let (xi, _) = stroke.eval(t)?;
        let row: Vec<String> = std::iter::once(t).chain(xi).map(num).collect();
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Generator curves at eight evenly spaced rows of `samples`, placed at
/// the travelled distance `φ`. Returns the files written.
pub fn write_snapshots(dir: &Path, family: &dyn ShapeFamily, samples: &[Sample]) -> Result<Vec<PathBuf>, ArtifactError> {
    let mut files = Vec::new();
    let last = samples.len().saturating_sub(1);
    for k in 0..SNAPSHOTS {
        let s = &samples[(k * last) / SNAPSHOTS];
        let cfg = family
            .configure(&s.xi, s.phi / family.displacement_scale())
            .map_err(|e| format(dir, format!("snapshot at t = {}: {e}", s.t)))?;
        let path = dir.join(format!("snapshot_{k:02}.csv"));
        let mut w = writer(&path)?;
        w.write_record(["patch", "s", "x", "sigma"]).map_err(csv_err(&path))?;
        for patch in 0..cfg.curve.patch_kinds().len() {
            for (param, [x, sigma]) in cfg.curve.sample_patch(patch, SNAPSHOT_POINTS) {
                w.write_record([patch.to_string(), num(param), num(x), num(sigma)]).map_err(csv_err(&path))?;
            }
        }
        w.flush().map_err(io(&path))?;
        files.push(path);
    }
    Ok(files)
}

pub fn write_matrix(path: &Path, m: &nalgebra::DMatrix<f64>) -> Result<(), ArtifactError> {
    let mut w = writer(path)?;
    w.write_record(["row", "col", "value"]).map_err(csv_err(path))?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_record([i.to_string(), j.to_string(), num(m[(i, j)])]).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io(path))
}

pub fn write_operators(dir: &Path, op: &BoundaryOperator) -> Result<(), ArtifactError> {
    write_matrix(&dir.join("A.csv"), op.single_layer())?;
    write_matrix(&dir.join("M.csv"), op.mass())
}

/// Reads a stroke written by [`write_coefficients`] or [`write_samples`].
/// Samples are projected onto the basis by least squares, which recovers
/// the coefficients of a stroke that was sampled from the same basis.
pub fn read_stroke(path: &Path, kind: TimeBasis, q: usize, period: f64, n: usize) -> Result<StrokePath, ArtifactError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let wanted: Vec<String> = shape_header("xi", n).collect();
    let columns: Vec<usize> = wanted
        .iter()
        .map(|name| header.iter().position(|h| h == name).ok_or_else(|| format(path, format!("missing column `{name}`"))))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |c: usize| -> Result<f64, ArtifactError> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| format(path, format!("row {}: bad value in column `{}`", line + 2, header[c])))
        };
        let lead = field(0)?;
        let xi = columns.iter().map(|&c| field(c)).collect::<Result<Vec<_>, _>>()?;
        rows.push((lead, xi));
    }
    match header.first().map(String::as_str) {
        Some("alpha") => {
            if rows.len() != q {
                return Err(format(path, format!("{} coefficient rows, the time basis has {q}", rows.len())));
            }
            for (k, (alpha, _)) in rows.iter().enumerate() {
                if *alpha != k as f64 {
                    return Err(format(path, format!("row {} has alpha = {alpha}, expected {k}", k + 2)));
                }
            }
            let coeffs = rows.into_iter().flat_map(|(_, xi)| xi).collect();
            Ok(StrokePath::new(kind, n, q, period, coeffs)?)
        }
        Some("t") => {
            if let Some((t, _)) = rows.iter().find(|(t, _)| !(*t >= 0.0 && *t <= period * (1.0 + 1e-12))) {
                return Err(format(path, format!("sample time {t} lies outside [0, {period}]")));
            }
            if rows.len() < q {
                return Err(format(path, format!("{} samples cannot determine {q} time controls", rows.len())));
            }
            Ok(StrokePath::fit(kind, q, period, &rows).map_err(|e| format(path, e.to_string()))?)
        }
        _ => Err(format(path, "first column must be `alpha` (coefficients) or `t` (samples)")),
    }
}

/// Streams the iteration log, one row per accepted step.
pub struct LogWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, ArtifactError> {
        let mut inner = writer(path)?;
        inner.write_record(LOG_HEADER).map_err(csv_err(path))?;
        inner.flush().map_err(io(path))?;
        Ok(Self { path: path.to_path_buf(), inner })
    }

    pub fn record(&mut self, h: &IterationLog) -> Result<(), ArtifactError> {
        let row = [
            h.iteration.to_string(),
            num(h.objective),
            num(h.constraint),
            num(h.constraint.abs()),
            num(h.stationarity),
            num(h.step_norm),
            num(h.alpha),
            num(h.merit),
            num(h.penalty),
            num(h.lambda),
            h.free_variables.to_string(),
        ];
        self.inner.write_record(&row).map_err(csv_err(&self.path))?;
        self.inner.flush().map_err(io(&self.path))
    }
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut f = File::create(path).map_err(io(path))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| format(path, e.to_string()))?;
    writeln!(f).map_err(io(path))
}
