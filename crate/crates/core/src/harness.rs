//! Configuration-driven experiment runner: flat `key = value` configs, single
//! runs, parameter scans and matrix dumps.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cycles::{iterate_with_inners, split_h};
use crate::dg::{Coefficient, DgSpace};
use crate::dsa::{DsaOperators, Preconditioner, PreconditionerKind};
use crate::mesh::{adversarial_ordering, uniform_mesh, SweepOrdering};
use crate::quadrature::gauss_legendre_set;
use crate::sparse::AssembledMatrix;
use crate::transport::{build_system, source_iteration, AngularFlux, AngularSource, IterationHistory, TransportSystem};
use crate::{lit, to_f64, Error, Real, Result};

/// Name of the built-in preset reproducing the one-dimensional study.
pub const PAPER_1D: &str = "paper-1d";

/// Opacity model. `Scaled` gives `sigma_t = s_t / eps`, `sigma_a = eps * s_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpacityModel<T: Real> {
    Scaled { s_t: T, s_a: T },
    Constant { sigma_t: T, sigma_a: T },
}

impl<T: Real> OpacityModel<T> {
    pub fn sigmas(&self, eps: T) -> (T, T) {
        match *self {
            OpacityModel::Scaled { s_t, s_a } => (s_t / eps, eps * s_a),
            OpacityModel::Constant { sigma_t, sigma_a } => (sigma_t, sigma_a),
        }
    }
}

/// Isotropic volume source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceModel<T: Real> {
    /// `eps (2 sin^2(3 x^2) + cos^2(x / 3))`.
    Smooth,
    Constant(T),
}

impl<T: Real> SourceModel<T> {
    pub fn build(&self, eps: T) -> AngularSource<T> {
        match *self {
            SourceModel::Smooth => AngularSource::function(
                move |x: T, _| {
                    let a = (lit::<T>(3.0) * x * x).sin();
                    let b = (x / lit::<T>(3.0)).cos();
                    eps * (lit::<T>(2.0) * a * a + b * b)
                },
                12,
            ),
            SourceModel::Constant(c) => AngularSource::constant(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderingSpec {
    Upwind,
    Adversarial { fraction: f64, seed: u64 },
}

impl FromStr for OrderingSpec {
    type Err = Error;

    /// `upwind`, `adversarial`, `adversarial:FRACTION` or
    /// `adversarial:FRACTION:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        match parts.next().map(str::to_ascii_lowercase).as_deref() {
            Some("upwind") if parts.next().is_none() => Ok(OrderingSpec::Upwind),
            Some("adversarial") => {
                let fraction = match parts.next() {
                    Some(f) => f.parse().map_err(|_| Error::config("ordering", format!("bad fraction `{f}`")))?,
                    None => 0.5,
                };
                let seed = match parts.next() {
                    Some(v) => v.parse().map_err(|_| Error::config("ordering", format!("bad seed `{v}`")))?,
                    None => 0,
                };
                if parts.next().is_some() {
                    return Err(Error::config("ordering", "too many fields"));
                }
                Ok(OrderingSpec::Adversarial { fraction, seed })
            }
            _ => Err(Error::config("ordering", format!("expected upwind or adversarial[:f[:seed]], got `{s}`"))),
        }
    }
}

impl std::fmt::Display for OrderingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrderingSpec::Upwind => f.write_str("upwind"),
            OrderingSpec::Adversarial { fraction, seed } => write!(f, "adversarial:{fraction}:{seed}"),
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T: Real> {
    pub domain: (T, T),
    pub n_elements: usize,
    pub degree: usize,
    pub n_angles: usize,
    pub eps: T,
    pub opacity: OpacityModel<T>,
    pub source: SourceModel<T>,
    /// Isotropic inflow on both boundaries.
    pub inflow: T,
    pub precond: PreconditionerKind,
    /// MIP penalty constant; `None` uses `r (r + 1)`.
    pub mip_cp: Option<T>,
    pub n_inner: usize,
    /// Update the scalar flux after every inner sweep instead of freezing it.
    pub update_flux: bool,
    pub ordering: OrderingSpec,
    pub max_iters: usize,
    pub tol: T,
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self::paper_1d()
    }
}

impl<T: Real> ExperimentConfig<T> {
    /// 100 elements of degree 6 on `[0, 1]`, S4, `sigma_t = 1/eps`,
    /// `sigma_a = eps`, the smooth source, no inflow, IP DSA.
    pub fn paper_1d() -> Self {
        Self {
            domain: (T::zero(), T::one()),
            n_elements: 100,
            degree: 6,
            n_angles: 4,
            eps: lit(1e-4),
            opacity: OpacityModel::Scaled {
                s_t: T::one(),
                s_a: T::one(),
            },
            source: SourceModel::Smooth,
            inflow: T::zero(),
            precond: PreconditionerKind::Ip,
            mip_cp: None,
            n_inner: 0,
            update_flux: false,
            ordering: OrderingSpec::Upwind,
            max_iters: 40,
            tol: lit(1e-10),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.trim() {
            PAPER_1D => Ok(Self::paper_1d()),
            other => Err(Error::config("preset", format!("unknown preset `{other}`"))),
        }
    }

    /// Parses `key = value` lines on top of the `paper-1d` preset. Blank lines
    /// and `#` comments are ignored; a `preset` key resets every field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::paper_1d();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` override without validating.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<T> {
            v.parse::<f64>()
                .map(lit)
                .map_err(|_| Error::config(key, format!("expected a number, got `{v}`")))
        };
        let int = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::config(key, format!("expected a non-negative integer, got `{v}`")))
        };
        match key {
            "preset" => *self = Self::preset(value)?,
            "domain" => {
                let parts: Vec<&str> = value.split([',', ' ']).filter(|s| !s.is_empty()).collect();
                if parts.len() != 2 {
                    return Err(Error::config(key, "expected two endpoints `a, b`"));
                }
                self.domain = (num(parts[0])?, num(parts[1])?);
            }
            "n_elements" => self.n_elements = int(value)?,
            "degree" => self.degree = int(value)?,
            "n_angles" => self.n_angles = int(value)?,
            "eps" => self.eps = num(value)?,
            "opacity" => {
                self.opacity = match value {
                    "scaled" => OpacityModel::Scaled {
                        s_t: T::one(),
                        s_a: T::one(),
                    },
                    "constant" => OpacityModel::Constant {
                        sigma_t: T::one(),
                        sigma_a: T::zero(),
                    },
                    _ => return Err(Error::config(key, "expected scaled or constant")),
                }
            }
            "s_t" | "s_a" => match &mut self.opacity {
                OpacityModel::Scaled { s_t, s_a } => *(if key == "s_t" { s_t } else { s_a }) = num(value)?,
                _ => return Err(Error::config(key, "only valid with opacity = scaled")),
            },
            "sigma_t" | "sigma_a" => match &mut self.opacity {
                OpacityModel::Constant { sigma_t, sigma_a } => {
                    *(if key == "sigma_t" { sigma_t } else { sigma_a }) = num(value)?
                }
                _ => return Err(Error::config(key, "only valid with opacity = constant")),
            },
            "source" => {
                self.source = match value {
                    "smooth" => SourceModel::Smooth,
                    v => match v.strip_prefix("constant") {
                        Some(rest) => {
                            let rest = rest.trim_start_matches([':', ' ']);
                            SourceModel::Constant(if rest.is_empty() { T::one() } else { num(rest)? })
                        }
                        None => return Err(Error::config(key, "expected smooth or constant[:value]")),
                    },
                }
            }
            "inflow" => self.inflow = num(value)?,
            "precond" => {
                self.precond = value.parse().map_err(|e: Error| Error::config(key, e.to_string()))?;
            }
            "mip_cp" => self.mip_cp = if value == "default" { None } else { Some(num(value)?) },
            "n_inner" => self.n_inner = int(value)?,
            "flux_update" => {
                self.update_flux = match value {
                    "frozen" => false,
                    "each-sweep" | "update" => true,
                    _ => return Err(Error::config(key, "expected frozen or each-sweep")),
                }
            }
            "ordering" => self.ordering = value.parse()?,
            "max_iters" => self.max_iters = int(value)?,
            "tol" => self.tol = num(value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && to_f64(x).is_finite();
        if !pos(self.eps) {
            return Err(Error::config("eps", "must be positive"));
        }
        if !(self.domain.1 > self.domain.0) {
            return Err(Error::config("domain", "right endpoint must exceed left"));
        }
        if self.n_elements == 0 {
            return Err(Error::config("n_elements", "must be at least 1"));
        }
        if self.degree == 0 {
            return Err(Error::config("degree", "must be at least 1"));
        }
        if self.n_angles < 2 || self.n_angles % 2 == 1 {
            return Err(Error::config("n_angles", "must be even and at least 2"));
        }
        match self.opacity {
            OpacityModel::Scaled { s_t, s_a } => {
                if !pos(s_t) {
                    return Err(Error::config("s_t", "must be positive"));
                }
                if s_a < T::zero() {
                    return Err(Error::config("s_a", "must be non-negative"));
                }
            }
            OpacityModel::Constant { sigma_t, sigma_a } => {
                if !pos(sigma_t) {
                    return Err(Error::config("sigma_t", "must be positive"));
                }
                if sigma_a < T::zero() || sigma_a > sigma_t {
                    return Err(Error::config("sigma_a", "must lie in [0, sigma_t]"));
                }
            }
        }
        if let OrderingSpec::Adversarial { fraction, .. } = self.ordering {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::config("ordering", "fraction must lie in [0, 1]"));
            }
        }
        if let Some(c) = self.mip_cp {
            if !pos(c) {
                return Err(Error::config("mip_cp", "must be positive"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if self.tol < T::zero() {
            return Err(Error::config("tol", "must be non-negative"));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = |x: T| format!("{:e}", to_f64(x));
        let _ = writeln!(s, "domain = {}, {}", f(self.domain.0), f(self.domain.1));
        let _ = writeln!(s, "n_elements = {}", self.n_elements);
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "n_angles = {}", self.n_angles);
        let _ = writeln!(s, "eps = {}", f(self.eps));
        match self.opacity {
            OpacityModel::Scaled { s_t, s_a } => {
                let _ = writeln!(s, "opacity = scaled\ns_t = {}\ns_a = {}", f(s_t), f(s_a));
            }
            OpacityModel::Constant { sigma_t, sigma_a } => {
                let _ = writeln!(s, "opacity = constant\nsigma_t = {}\nsigma_a = {}", f(sigma_t), f(sigma_a));
            }
        }
        match self.source {
            SourceModel::Smooth => s.push_str("source = smooth\n"),
            SourceModel::Constant(c) => {
                let _ = writeln!(s, "source = constant:{}", f(c));
            }
        }
        let _ = writeln!(s, "inflow = {}", f(self.inflow));
        let _ = writeln!(s, "precond = {}", self.precond);
        if let Some(c) = self.mip_cp {
            let _ = writeln!(s, "mip_cp = {}", f(c));
        }
        let _ = writeln!(s, "n_inner = {}", self.n_inner);
        let _ = writeln!(s, "flux_update = {}", if self.update_flux { "each-sweep" } else { "frozen" });
        let _ = writeln!(s, "ordering = {}", self.ordering);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "tol = {}", f(self.tol));
        s
    }

    /// Short file-name friendly label.
    pub fn label(&self) -> String {
        format!("{}_eps{:e}", self.precond, to_f64(self.eps))
    }

    pub fn build_system(&self) -> Result<TransportSystem<T>> {
        self.validate()?;
        let mesh = uniform_mesh(self.domain.0, self.domain.1, self.n_elements)?;
        let (sigma_t, sigma_a) = self.opacity.sigmas(self.eps);
        build_system(
            DgSpace::new(mesh, self.degree),
            gauss_legendre_set(self.n_angles)?,
            self.eps,
            Coefficient::constant(sigma_t),
            Coefficient::constant(sigma_a),
            &self.source.build(self.eps),
            &AngularSource::constant(self.inflow),
        )
    }

    pub fn build_ordering(&self, sys: &TransportSystem<T>) -> Result<SweepOrdering> {
        Ok(match self.ordering {
            OrderingSpec::Upwind => crate::mesh::upwind_ordering(sys.space.mesh(), &sys.dirs),
            OrderingSpec::Adversarial { fraction, seed } => {
                adversarial_ordering(sys.space.mesh(), &sys.dirs, fraction, seed)?
            }
        })
    }

    pub fn build_preconditioner(&self, sys: &TransportSystem<T>) -> Result<Preconditioner<T>> {
        match self.mip_cp {
            Some(c) => Preconditioner::with_mip_constant(sys, self.precond, c),
            None => Preconditioner::new(sys, self.precond),
        }
    }

    /// Thickness parameter `min(eps / (h sigma_t), eps sqrt(sigma_a / sigma_t))`
    /// with the smallest element width.
    pub fn eta(&self) -> T {
        let (st, sa) = self.opacity.sigmas(self.eps);
        let h = (self.domain.1 - self.domain.0) / lit(self.n_elements as f64);
        (self.eps / (h * st)).min(self.eps * (sa / st).sqrt())
    }
}

/// Where run artifacts go.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputOptions {
    pub out_dir: Option<PathBuf>,
    pub dump_matrices: bool,
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct ExperimentResult<T: Real> {
    pub config: ExperimentConfig<T>,
    pub eta: T,
    pub history: IterationHistory<T>,
    pub flux: AngularFlux<T>,
    pub files: Vec<PathBuf>,
}

impl<T: Real> ExperimentResult<T> {
    /// Preconditioned runs are expected to converge; plain source iteration is
    /// not.
    pub fn convergence_expected(&self) -> bool {
        self.config.precond != PreconditionerKind::None
    }

    /// 0 when the outcome is acceptable, 2 when an expected convergence failed.
    pub fn exit_code(&self) -> i32 {
        if self.convergence_expected() && (self.history.diverged || !self.history.converged) {
            2
        } else {
            0
        }
    }

    pub fn summary(&self) -> String {
        let h = &self.history;
        let status = if h.diverged {
            "diverged"
        } else if h.converged {
            "converged"
        } else {
            "not converged"
        };
        format!(
            "{} eps={:e} eta={:.3e}: {status} after {} iterations, error {:.3e}, residual {:.3e}, {} sweeps",
            self.config.precond,
            to_f64(self.config.eps),
            to_f64(self.eta),
            h.iterations(),
            h.final_error().map(to_f64).unwrap_or(f64::NAN),
            h.final_residual().map(to_f64).unwrap_or(f64::NAN),
            h.total_sweeps()
        )
    }
}

/// Exit code for an error: 1 for configuration problems, 2 otherwise.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Parse(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Solves with the configured iteration and no artifacts.
pub fn solve<T: Real>(cfg: &ExperimentConfig<T>) -> Result<(TransportSystem<T>, AngularFlux<T>, IterationHistory<T>)> {
    let sys = cfg.build_system()?;
    let ordering = cfg.build_ordering(&sys)?;
    let precond = cfg.build_preconditioner(&sys)?;
    let p = (cfg.precond != PreconditionerKind::None).then_some(&precond);
    let (flux, history) = if ordering.is_exact() && cfg.n_inner == 0 && !cfg.update_flux {
        source_iteration(&sys, &ordering, p, cfg.max_iters, cfg.tol)?
    } else {
        let split = split_h(&sys, &ordering)?;
        iterate_with_inners(&sys, &split, p, cfg.n_inner, cfg.update_flux, cfg.max_iters, cfg.tol)?
    };
    Ok((sys, flux, history))
}

/// Builds, iterates and writes `<label>.csv` (plus `<label>.cfg` and matrix
/// dumps when requested) under the output directory.
pub fn run_experiment<T: Real>(cfg: &ExperimentConfig<T>, out: &OutputOptions) -> Result<ExperimentResult<T>> {
    let (sys, flux, history) = solve(cfg)?;
    let mut files = Vec::new();
    if let Some(dir) = &out.out_dir {
        fs::create_dir_all(dir)?;
        let stem = cfg.label();
        let csv = dir.join(format!("{stem}.csv"));
        history.write_csv(BufWriter::new(File::create(&csv)?))?;
        files.push(csv);
        let cfg_path = dir.join(format!("{stem}.cfg"));
        fs::write(&cfg_path, cfg.to_text())?;
        files.push(cfg_path);
        if out.dump_matrices {
            files.extend(dump_system(&sys, dir, &stem)?);
        }
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        eta: cfg.eta(),
        history,
        flux,
        files,
    })
}

fn write_mtx<T: Real>(m: &AssembledMatrix<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    m.write_matrix_market(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes the mass, gradient, face-moment and DSA matrices as Matrix Market
/// files named `<stem>_<name>.mtx`.
pub fn dump_system<T: Real>(sys: &TransportSystem<T>, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let ops = DsaOperators::assemble(sys);
    let mut named: Vec<(&str, &AssembledMatrix<T>)> = vec![
        ("M_t", &sys.m_t),
        ("M_a", &sys.m_a),
        ("G", &sys.g),
        ("F0", &sys.moments.f0),
        ("F1", &sys.moments.f1),
        ("F1_adjoint", &sys.moments.f1_adjoint),
    ];
    named.extend(ops.named());
    let mut files = Vec::new();
    for (name, m) in named {
        let path = dir.join(format!("{stem}_{name}.mtx"));
        write_mtx(m, &path)?;
        files.push(path);
    }
    Ok(files)
}

/// Matrix dump without iterating.
pub fn dump<T: Real>(cfg: &ExperimentConfig<T>, dir: &Path) -> Result<Vec<PathBuf>> {
    let sys = cfg.build_system()?;
    dump_system(&sys, dir, &cfg.label())
}

/// Converged solution for measuring true errors: IP DSA on the upwind
/// ordering, iterated `max_iters` times without a stopping tolerance.
pub fn reference_solution<T: Real>(cfg: &ExperimentConfig<T>) -> Result<AngularFlux<T>> {
    let mut r = cfg.clone();
    r.precond = PreconditionerKind::Ip;
    r.ordering = OrderingSpec::Upwind;
    r.n_inner = 0;
    r.update_flux = false;
    r.tol = T::zero();
    Ok(solve(&r)?.1)
}

/// Largest nodal difference from a reference flux.
pub fn error_against<T: Real>(flux: &AngularFlux<T>, reference: &AngularFlux<T>) -> T {
    flux.max_abs_diff(reference)
}

/// One scan cell.
#[derive(Debug, Clone)]
pub struct ScanCell<T: Real> {
    pub eps: T,
    pub precond: PreconditionerKind,
    pub outcome: std::result::Result<ExperimentResult<T>, String>,
}

#[derive(Debug, Clone)]
pub struct ScanSummary<T: Real> {
    pub cells: Vec<ScanCell<T>>,
}

impl<T: Real> ScanSummary<T> {
    pub const CSV_HEADER: &'static str =
        "eps,precond,iterations,final_error,final_residual,total_sweeps,converged,diverged,error";

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for c in &self.cells {
            match &c.outcome {
                Ok(r) => {
                    let h = &r.history;
                    writeln!(
                        out,
                        "{:.16e},{},{},{:.16e},{:.16e},{},{},{},",
                        to_f64(c.eps),
                        c.precond,
                        h.iterations(),
                        h.final_error().map(to_f64).unwrap_or(f64::NAN),
                        h.final_residual().map(to_f64).unwrap_or(f64::NAN),
                        h.total_sweeps(),
                        h.converged,
                        h.diverged
                    )?;
                }
                Err(e) => writeln!(
                    out,
                    "{:.16e},{},,,,,,,\"{}\"",
                    to_f64(c.eps),
                    c.precond,
                    e.replace('"', "\"\"")
                )?,
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Largest exit code over the cells.
    pub fn exit_code(&self) -> i32 {
        self.cells
            .iter()
            .map(|c| match &c.outcome {
                Ok(r) => r.exit_code(),
                Err(_) => 2,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Runs every `(eps, preconditioner)` cell of `base`, concurrently, writing
/// per-cell histories and `summary.csv` when an output directory is given.
/// Cell failures are recorded and do not stop the scan.
pub fn run_scan<T: Real>(
    base: &ExperimentConfig<T>,
    eps_list: &[T],
    preconds: &[PreconditionerKind],
    out: &OutputOptions,
) -> Result<ScanSummary<T>> {
    base.validate()?;
    let jobs: Vec<(T, PreconditionerKind)> = eps_list
        .iter()
        .flat_map(|&e| preconds.iter().map(move |&p| (e, p)))
        .collect();
    let cells = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(eps, precond)| {
                s.spawn(move || {
                    let mut cfg = base.clone();
                    cfg.eps = eps;
                    cfg.precond = precond;
                    run_experiment(&cfg, out).map_err(|e| e.to_string())
                })
            })
            .collect();
        handles
            .into_iter()
            .zip(&jobs)
            .map(|(h, &(eps, precond))| ScanCell {
                eps,
                precond,
                outcome: h.join().unwrap_or_else(|_| Err("cell panicked".into())),
            })
            .collect()
    });
    let summary = ScanSummary { cells };
    if let Some(dir) = &out.out_dir {
        fs::create_dir_all(dir)?;
        summary.write_csv(BufWriter::new(File::create(dir.join("summary.csv"))?))?;
    }
    Ok(summary)
}
