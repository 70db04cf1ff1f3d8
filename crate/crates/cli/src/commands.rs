//! The three subcommands. Each returns the text for stdout and an exit code;
//! nothing here prints or exits.

use std::path::{Path, PathBuf};

use hypokernel::covariance::DEFAULT_SAMPLE_TIMES;
use hypokernel::extension::{default_z_grid, dtn_sweep};
use hypokernel::fractional::frac_k_report;
use hypokernel::kernels::hormander_kernel;
use hypokernel::semigroup::pt_image_exact;
use hypokernel::{apply_pt, extend_k, hypo_report, Error, ModelSpec};
use rayon::prelude::*;

use crate::config::{PointConfig, RunConfig};
use crate::csv::{indexed, Table};
use crate::verify::{verify, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    /// Invalid input is a usage error, a singular covariance a failed
    /// precondition, and a numerical failure an unverifiable result.
    pub fn from_core(context: &str, e: &Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Invalid(_) | Error::DimensionMismatch { .. } | Error::DegreeCap { .. } => {
                EXIT_USAGE
            }
            Error::NotPositiveDefinite { .. } => EXIT_PRECONDITION,
            Error::QuadratureNotConverged { .. } | Error::NonReal(_) | Error::Overflow(_) => EXIT_VERIFICATION,
        };
        Self { code, message: format!("{context}: {e}") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Kernel,
    Semigroup,
    Frac,
    Extend,
    Dtn,
}

impl Task {
    fn needs_hypoellipticity(self) -> bool {
        !matches!(self, Task::Semigroup)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| CliError::from_core(&path.display().to_string(), &e))
}

fn require_hypoelliptic(model: &ModelSpec) -> Result<(), CliError> {
    let report = hypo_report(model, &DEFAULT_SAMPLE_TIMES).map_err(|e| CliError::from_core("model", &e))?;
    if report.is_hypoelliptic {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_PRECONDITION,
            message: format!("model is not hypoelliptic (Kalman rank {} < {})", report.kalman_rank, report.dim),
        })
    }
}

pub fn check(config: &RunConfig) -> Result<Outcome, CliError> {
    let report = hypo_report(&config.model, &DEFAULT_SAMPLE_TIMES).map_err(|e| CliError::from_core("model", &e))?;
    let code = if report.is_hypoelliptic { EXIT_OK } else { EXIT_PRECONDITION };
    let stdout = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok(Outcome { code, stdout })
}

pub fn verify_command(config: &RunConfig, suite: Suite) -> Result<Outcome, CliError> {
    if suite.members().iter().any(|s| s.needs_hypoellipticity()) {
        require_hypoelliptic(&config.model)?;
    }
    let report = verify(config, suite).map_err(|e| CliError::from_core("verify", &e))?;
    let code = if report.passed { EXIT_OK } else { EXIT_VERIFICATION };
    let stdout = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok(Outcome { code, stdout })
}

fn missing(i: usize, what: &str) -> CliError {
    CliError::usage(format!("point {i}: missing `{what}`"))
}

fn order(config: &RunConfig) -> Result<f64, CliError> {
    config.order().ok_or_else(|| CliError::usage("this task needs `fractional.s`"))
}

/// One CSV row per configured point, computed in parallel and kept in input order.
fn rows<F>(config: &RunConfig, row: F) -> Result<Vec<Vec<f64>>, CliError>
where
    F: Fn(usize, &PointConfig) -> Result<Vec<f64>, CliError> + Sync,
{
    if config.points.is_empty() {
        return Err(CliError::usage("this task needs at least one entry in `points`"));
    }
    config.points.par_iter().enumerate().map(|(i, p)| row(i, p)).collect()
}

fn at(i: usize) -> impl Fn(Error) -> CliError {
    move |e| CliError::from_core(&format!("point {i}"), &e)
}

pub fn eval(config: &RunConfig, task: Task) -> Result<Table, CliError> {
    if task.needs_hypoellipticity() {
        require_hypoelliptic(&config.model)?;
    }
    let n = config.model.dim();
    let model = &config.model;
    let quad = &config.quadrature;
    let xs = indexed("x", n);
    let (header, data) = match task {
        Task::Kernel => {
            let form = config.form();
            let data = rows(config, |i, p| {
                let y = p.y.as_ref().ok_or_else(|| missing(i, "y"))?;
                let t = p.t.ok_or_else(|| missing(i, "t"))?;
                let v = hormander_kernel(model, &p.x, y, t, form).map_err(at(i))?;
                Ok([p.x.clone(), y.clone(), vec![t, v]].concat())
            })?;
            ([xs, indexed("y", n), vec!["t".into(), "p".into()]].concat(), data)
        }
        Task::Semigroup => {
            let f = config.space_function().map_err(|e| CliError::from_core("function", &e))?;
            let data = rows(config, |i, p| {
                let t = p.t.ok_or_else(|| missing(i, "t"))?;
                let v = apply_pt(&f, model, &p.x, t, quad).map_err(at(i))?;
                let exact = pt_image_exact(&f, model, t).and_then(|g| g.eval(&p.x)).map_err(at(i))?;
                Ok([p.x.clone(), vec![t, v, exact]].concat())
            })?;
            ([xs, vec!["t".into(), "pt".into(), "pt_exact".into()]].concat(), data)
        }
        Task::Frac => {
            let s = order(config)?;
            let u = config.space_time_function().map_err(|e| CliError::from_core("function", &e))?;
            let data = rows(config, |i, p| {
                let t = p.t.unwrap_or(0.0);
                let r = frac_k_report(&u, model, &p.x, t, s, quad).map_err(at(i))?;
                Ok([p.x.clone(), vec![t, s, r.value, r.tail_bound]].concat())
            })?;
            ([xs, vec!["t".into(), "s".into(), "value".into(), "tail_bound".into()]].concat(), data)
        }
        Task::Extend => {
            let a = 1.0 - 2.0 * order(config)?;
            let u = config.space_time_function().map_err(|e| CliError::from_core("function", &e))?;
            let data = rows(config, |i, p| {
                let t = p.t.unwrap_or(0.0);
                let z = p.z.ok_or_else(|| missing(i, "z"))?;
                let v = extend_k(&u, model, &p.x, t, z, a, quad).map_err(at(i))?;
                Ok([p.x.clone(), vec![t, z, a, v]].concat())
            })?;
            ([xs, vec!["t".into(), "z".into(), "a".into(), "value".into()]].concat(), data)
        }
        Task::Dtn => {
            let s = order(config)?;
            let u = config.space_time_function().map_err(|e| CliError::from_core("function", &e))?;
            let point =
                config.points.first().ok_or_else(|| CliError::usage("the dtn task needs one entry in `points`"))?;
            let zs = if config.z_grid.is_empty() { default_z_grid() } else { config.z_grid.clone() };
            let sweep = dtn_sweep(&u, model, &point.x, point.t.unwrap_or(0.0), s, &zs, quad).map_err(at(0))?;
            let data = sweep.points.iter().map(|p| vec![p.z, p.value, p.reference, p.abs_err]).collect();
            (vec!["z".into(), "dtn_value".into(), "frac_value".into(), "abs_err".into()], data)
        }
    };
    let mut table = Table::new(header);
    for row in data {
        table.push(row);
    }
    Ok(table)
}

pub fn eval_command(config: &RunConfig, task: Task, output: Option<&PathBuf>) -> Result<Outcome, CliError> {
    let csv = eval(config, task)?.render();
    match output {
        Some(path) => {
            std::fs::write(path, &csv).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            Ok(Outcome { code: EXIT_OK, stdout: String::new() })
        }
        None => Ok(Outcome { code: EXIT_OK, stdout: csv }),
    }
}

/// Reads HYPOKERNEL_THREADS; absent means rayon's default.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::usage(format!("HYPOKERNEL_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> RunConfig {
        RunConfig::parse(text).unwrap()
    }

    const KOLMOGOROV: &str = r#""model": {"q": [[1.0, 0.0], [0.0, 0.0]], "b": [[0.0, 0.0], [1.0, 0.0]]}"#;

    #[test]
    fn check_exit_codes() {
        assert_eq!(check(&config(&format!("{{{KOLMOGOROV}}}"))).unwrap().code, EXIT_OK);
        let degenerate = config(r#"{"model": {"q": [[1.0, 0.0], [0.0, 0.0]], "b": [[0.0, 0.0], [0.0, 0.0]]}}"#);
        let out = check(&degenerate).unwrap();
        assert_eq!(out.code, EXIT_PRECONDITION);
        assert!(out.stdout.contains("\"is_hypoelliptic\": false"));
    }

    #[test]
    fn kernel_rows_follow_points() {
        let text = format!(
            r#"{{{KOLMOGOROV}, "points": [{{"x": [0.0, 0.0], "y": [0.1, 0.2], "t": 1.0}},
                {{"x": [0.3, 0.0], "y": [0.1, 0.2], "t": 0.5}}, {{"x": [0.0, 1.0], "y": [0.0, 0.0], "t": 2.0}}]}}"#
        );
        let table = eval(&config(&text), Task::Kernel).unwrap();
        assert_eq!(table.len(), 3);
        assert!(table.render().starts_with("x0,x1,y0,y1,t,p\n"));
    }

    #[test]
    fn failing_point_is_named() {
        let text = format!(
            r#"{{{KOLMOGOROV}, "points": [{{"x": [0.0, 0.0], "y": [0.1, 0.2], "t": 1.0}}, {{"x": [0.0, 0.0]}}]}}"#
        );
        let err = eval(&config(&text), Task::Kernel).unwrap_err();
        assert_eq!(err.code, EXIT_USAGE);
        assert!(err.message.contains("point 1"), "{}", err.message);
    }

    #[test]
    fn precondition_gate() {
        let text = r#"{"model": {"q": [[0.0]], "b": [[0.0]]}, "fractional": {"s": 0.5}, "points": [{"x": [0.0]}]}"#;
        assert_eq!(eval(&config(text), Task::Frac).unwrap_err().code, EXIT_PRECONDITION);
        assert_eq!(verify_command(&config(text), Suite::Extension).unwrap_err().code, EXIT_PRECONDITION);
    }

    #[test]
    fn thread_cap_parsing() {
        assert_eq!(thread_cap(None).unwrap(), None);
        assert_eq!(thread_cap(Some("4")).unwrap(), Some(4));
        assert!(thread_cap(Some("0")).is_err());
        assert!(thread_cap(Some("many")).is_err());
    }
}
