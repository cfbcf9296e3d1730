//! Configuration-driven command line driver.
//!
//! A run is described by a flat `key = value` file. Every key is optional;
//! `anisowave --help` lists them with their defaults. Outputs are CSV tables
//! plus `manifest.json`, written to `out_dir` through temporary files that are
//! renamed only after every output of the run has been produced.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::assembly::{
    assemble_full, build_window_patches, compress_with, BasisWindow, DenseMatrix, Domain, PatternBuilder, MAX_DENSE,
};
use crate::basis1d::build_family;
use crate::compression::{
    CompressionParams, DEFAULT_ALPHA, DEFAULT_SIGMA_SHIFT, DEFAULT_THETA, DEFAULT_XI,
};
use crate::experiments::{
    audit_samples, basis_check, decay_rows, decay_slopes, distance_samples, row_ratio, sstar_table, summarize_audit,
    DecayRow, Oracle,
};
use crate::kernels::Kernel;
use crate::manifold::{Adjacency, PatchGeometry, Preset};
use crate::quadrature::QuadratureSpec;

/// Largest window for which the keep/drop pattern is enumerated pairwise.
pub const MAX_PATTERN: usize = 32_768;
/// Windows up to this size get every pair in pattern dumps.
pub const FULL_DUMP: usize = 1024;
pub const AUDIT_SAMPLES: usize = 500;
pub const DISTANCE_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BasisCheck,
    Sstar,
    Assemble,
    Compress,
    VerifyDecay,
    Complexity,
    BoundsAudit,
    ManifoldDemo,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::BasisCheck,
        Command::Sstar,
        Command::Assemble,
        Command::Compress,
        Command::VerifyDecay,
        Command::Complexity,
        Command::BoundsAudit,
        Command::ManifoldDemo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::BasisCheck => "basis-check",
            Command::Sstar => "sstar",
            Command::Assemble => "assemble",
            Command::Compress => "compress",
            Command::VerifyDecay => "verify-decay",
            Command::Complexity => "complexity",
            Command::BoundsAudit => "bounds-audit",
            Command::ManifoldDemo => "manifold-demo",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    /// One-based line of the offending entry; `None` for whole-file checks.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub command: Command,
    pub family_order: usize,
    pub j: u32,
    pub kernel: Kernel,
    pub q2: f64,
    pub r_min: u32,
    pub r_max: u32,
    pub alpha: f64,
    pub xi: f64,
    pub theta: f64,
    pub sigma_shift: f64,
    pub quad_order: usize,
    pub quad_tol: f64,
    pub geometry: Preset,
    /// Zero means all available cores.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let quad = QuadratureSpec::default();
        Config {
            command: Command::BasisCheck,
            family_order: 1,
            j: 4,
            kernel: Kernel::SingleLayer,
            q2: -1.0,
            r_min: 2,
            r_max: 6,
            alpha: DEFAULT_ALPHA,
            xi: DEFAULT_XI,
            theta: DEFAULT_THETA,
            sigma_shift: DEFAULT_SIGMA_SHIFT,
            quad_order: quad.gauss_order,
            quad_tol: quad.rel_tol,
            geometry: Preset::UnitSquare,
            threads: 0,
            out_dir: PathBuf::from("out"),
            seed: crate::analysis::DEFAULT_SEED,
        }
    }
}

pub const KEYS: [&str; 17] = [
    "command",
    "family_order",
    "J",
    "kernel",
    "q2",
    "r_min",
    "r_max",
    "alpha",
    "xi",
    "theta",
    "sigma_shift",
    "quad_order",
    "quad_tol",
    "geometry",
    "threads",
    "out_dir",
    "seed",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("invalid value `{v}` for `{key}`: {e}"))
}

fn parse_real(key: &str, v: &str) -> Result<f64, String> {
    let x: f64 = parse_num(key, v)?;
    if !x.is_finite() {
        return Err(format!("invalid value `{v}` for `{key}`: not finite"));
    }
    Ok(x)
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut q2_given = false;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError { line: Some(line), message };
            let Some((k, v)) = s.split_once('=') else {
                return Err(err(format!("expected `key = value`, found `{s}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(key) = KEYS.iter().copied().find(|x| *x == k) else {
                return Err(err(format!("unknown key `{k}`")));
            };
            if let Some(prev) = seen.insert(key, line) {
                return Err(err(format!("duplicate key `{key}` (first set on line {prev})")));
            }
            if v.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            let r: Result<(), String> = (|| {
                match key {
                    "command" => c.command = v.parse()?,
                    "family_order" => c.family_order = parse_num(key, v)?,
                    "J" => c.j = parse_num(key, v)?,
                    "kernel" => c.kernel = v.parse().map_err(|e| format!("{e}"))?,
                    "q2" => {
                        c.q2 = parse_real(key, v)?;
                        q2_given = true;
                    }
                    "r_min" => c.r_min = parse_num(key, v)?,
                    "r_max" => c.r_max = parse_num(key, v)?,
                    "alpha" => c.alpha = parse_real(key, v)?,
                    "xi" => c.xi = parse_real(key, v)?,
                    "theta" => c.theta = parse_real(key, v)?,
                    "sigma_shift" => c.sigma_shift = parse_real(key, v)?,
                    "quad_order" => c.quad_order = parse_num(key, v)?,
                    "quad_tol" => c.quad_tol = parse_real(key, v)?,
                    "geometry" => c.geometry = v.parse().map_err(|e| format!("{e}"))?,
                    "threads" => c.threads = parse_num(key, v)?,
                    "out_dir" => c.out_dir = PathBuf::from(v),
                    "seed" => c.seed = parse_num(key, v)?,
                    _ => unreachable!("key list and match arms agree"),
                }
                Ok(())
            })();
            r.map_err(err)?;
        }
        if !q2_given {
            c.q2 = match c.kernel {
                Kernel::Constant => 0.0,
                k => k.order_2q(),
            };
        }
        c.validate().map_err(|(key, message)| ConfigError { line: key.and_then(|k| seen.get(k).copied()), message })?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), (Option<&'static str>, String)> {
        if !(1..=8).contains(&self.family_order) {
            return Err((Some("family_order"), format!("family_order = {} outside 1..=8", self.family_order)));
        }
        if !(-1.0..=1.0).contains(&self.q2) {
            return Err((Some("q2"), format!("q2 = {} outside [-1, 1]", self.q2)));
        }
        if self.r_min > self.r_max {
            return Err((Some("r_max"), format!("r_min = {} exceeds r_max = {}", self.r_min, self.r_max)));
        }
        if self.r_max > 64 {
            return Err((Some("r_max"), format!("r_max = {} above 64", self.r_max)));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) {
            return Err((Some("quad_tol"), format!("quad_tol = {} outside (0, 1)", self.quad_tol)));
        }
        if !(self.sigma_shift > 0.0) {
            return Err((Some("sigma_shift"), format!("sigma_shift = {} must be positive", self.sigma_shift)));
        }
        self.params(0).validate().map_err(|e| (None, e.to_string()))?;
        self.quadrature().validate(self.family_order).map_err(|e| (Some("quad_order"), e.to_string()))?;
        Ok(())
    }

    pub fn params(&self, r: u32) -> CompressionParams {
        CompressionParams {
            alpha: self.alpha,
            xi: self.xi,
            theta: self.theta,
            sigma_shift: self.sigma_shift,
            ..CompressionParams::new(self.family_order as u32, 0.5 * self.q2, r)
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec { gauss_order: self.quad_order, rel_tol: self.quad_tol, ..QuadratureSpec::default() }
    }

    pub fn rs(&self) -> Vec<u32> {
        (self.r_min..=self.r_max).collect()
    }

    fn to_json(&self) -> Value {
        json!({
            "command": self.command.as_str(),
            "family_order": self.family_order,
            "J": self.j,
            "kernel": self.kernel.id(),
            "q2": self.q2,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "alpha": self.alpha,
            "xi": self.xi,
            "theta": self.theta,
            "sigma_shift": self.sigma_shift,
            "quad_order": self.quad_order,
            "quad_tol": self.quad_tol,
            "geometry": self.geometry.name(),
            "threads": self.threads,
            "out_dir": self.out_dir.display().to_string(),
            "seed": self.seed,
        })
    }
}

pub fn help_text() -> String {
    let d = Config::default();
    let mut s = String::new();
    s.push_str("usage: anisowave <config-file>\n       anisowave --help\n\n");
    s.push_str("The config file holds `key = value` lines; `#` starts a comment line.\n\n");
    s.push_str("commands: ");
    s.push_str(&Command::ALL.map(|c| c.as_str()).join(", "));
    s.push_str("\n\nkeys and defaults:\n");
    let rows = [
        ("command", d.command.to_string(), "what to run"),
        ("family_order", d.family_order.to_string(), "multiwavelet order d, 1..=8"),
        ("J", d.j.to_string(), "finest level per direction"),
        ("kernel", d.kernel.id(), "single_layer | power_law:<2q> | log | constant"),
        ("q2", "order of kernel".to_string(), "operator order 2q in [-1, 1]"),
        ("r_min", d.r_min.to_string(), "smallest compression parameter r"),
        ("r_max", d.r_max.to_string(), "largest compression parameter r"),
        ("alpha", d.alpha.to_string(), "cutoff growth alpha > 1"),
        ("xi", d.xi.to_string(), "first-compression exponent in (1/2, 1)"),
        ("theta", d.theta.to_string(), "mixed-compression exponent in (1/2, 1)"),
        ("sigma_shift", d.sigma_shift.to_string(), "regularity shift sigma"),
        ("quad_order", d.quad_order.to_string(), "Gauss points per direction"),
        ("quad_tol", format!("{:e}", d.quad_tol), "relative quadrature tolerance"),
        ("geometry", d.geometry.to_string(), "unit_square | two_patch_screen | l_corner | cylinder_pair"),
        ("threads", d.threads.to_string(), "worker threads, 0 = all cores"),
        ("out_dir", d.out_dir.display().to_string(), "output directory"),
        ("seed", d.seed.to_string(), "seed for random starts and samples"),
    ];
    for (k, v, h) in rows {
        s.push_str(&format!("  {k:<13} {v:<18} {h}\n"));
    }
    s.push_str("\nexit status: 0 success, 1 runtime failure, 2 malformed config, 3 size guard\n");
    s
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("refused: {0}")]
    Guard(String),
    #[error("{0}")]
    Runtime(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

fn runtime<E: fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Files of one run, committed together.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(runtime)?;
        }
        self.files.push((name.to_string(), w.into_inner().map_err(runtime)?));
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_vec_pretty(v).map_err(runtime)?;
        s.push(b'\n');
        self.files.push((name.to_string(), s));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Temporary files first, then renames; a failure leaves no final file
    /// of this run behind.
    pub fn commit(self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let mut temps = Vec::with_capacity(self.files.len());
        let cleanup = |temps: &[(PathBuf, PathBuf)]| {
            for (t, _) in temps {
                let _ = fs::remove_file(t);
            }
        };
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            let res = fs::File::create(&tmp).and_then(|mut f| {
                f.write_all(bytes)?;
                f.sync_all()
            });
            temps.push((tmp, dir.join(name)));
            if let Err(e) = res {
                cleanup(&temps);
                return Err(e.into());
            }
        }
        for (tmp, dst) in &temps {
            if let Err(e) = fs::rename(tmp, dst) {
                cleanup(&temps);
                return Err(e.into());
            }
        }
        Ok(())
    }
}

struct Setup {
    geometry: Option<PatchGeometry>,
    window: BasisWindow,
}

impl Setup {
    fn domain(&self) -> Domain<'_> {
        match &self.geometry {
            Some(g) => Domain::Surface(g),
            None => Domain::UnitSquare,
        }
    }
}

fn setup(c: &Config, limit: usize, what: &str) -> Result<Setup, CliError> {
    let geometry = match c.geometry {
        Preset::UnitSquare => None,
        p => Some(PatchGeometry::preset(p)),
    };
    let patches = geometry.as_ref().map_or(1, |g| g.patch_count());
    let per_dir = c.family_order as u128 * (1u128 << (c.j.min(64) + 1));
    let n = per_dir * per_dir * patches as u128;
    if n > limit as u128 {
        return Err(CliError::Guard(format!(
            "{what} needs N = {n} basis functions, above the limit {limit}; lower J or family_order"
        )));
    }
    let fam = build_family(c.family_order, c.j).map_err(|e| CliError::Guard(e.to_string()))?;
    let window = build_window_patches(&fam, c.j, patches).map_err(|e| CliError::Guard(e.to_string()))?;
    Ok(Setup { geometry, window })
}

fn dense(c: &Config, s: &Setup) -> Result<DenseMatrix, CliError> {
    assemble_full(&s.window, s.domain(), c.kernel, 0.5 * c.q2, &c.quadrature()).map_err(runtime)
}

#[derive(Serialize)]
struct DecayCsv {
    r: u32,
    nnz_total: usize,
    nnz_row_max: usize,
    err_norm_est: f64,
    schur_tail_max: f64,
    runtime_s: f64,
}

impl From<&DecayRow> for DecayCsv {
    fn from(r: &DecayRow) -> Self {
        DecayCsv {
            r: r.r,
            nnz_total: r.nnz_total,
            nnz_row_max: r.nnz_row_max,
            err_norm_est: r.err_norm_est,
            schur_tail_max: r.schur_tail_max,
            runtime_s: r.runtime_s,
        }
    }
}

fn decay_targets(p: &CompressionParams) -> Value {
    let (s_bar, _) = p.rate_params();
    let dq = p.d_tilde as f64 + p.q;
    json!({
        "err_slope_target": 0.8 * (p.alpha * s_bar).min(0.5 * p.d_tilde as f64 + p.q),
        "tail_slope_target": 0.8 * 0.5 * dq,
    })
}

fn decay_outputs(c: &Config, s: &Setup, out: &mut Outputs, results: &mut Value) -> Result<(), CliError> {
    let m = dense(c, s)?;
    let rows = decay_rows(&s.window, s.domain(), &m, c.params(0), &c.rs(), c.seed).map_err(runtime)?;
    out.csv("decay.csv", &rows.iter().map(DecayCsv::from).collect::<Vec<_>>())?;
    results["n"] = json!(s.window.dim());
    results["norm_converged"] = json!(rows.iter().map(|r| r.norm_converged).collect::<Vec<_>>());
    if rows.len() >= 3 {
        let sl = decay_slopes(&rows).map_err(runtime)?;
        results["err_slope"] = json!(sl.err);
        results["tail_slope"] = json!(sl.tail);
    }
    results["targets"] = decay_targets(&c.params(0));
    Ok(())
}

#[derive(Serialize)]
struct PatternCsv {
    row_index: usize,
    col_index: usize,
    jx: u32,
    jy: u32,
    jx2: u32,
    jy2: u32,
    stage: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct SstarCsv {
    d: u32,
    q2: i32,
    alpha: f64,
    min_d_tilde: String,
}

#[derive(Serialize)]
struct ComplexityCsv {
    r: u32,
    n: usize,
    nnz_total: usize,
    nnz_row_max: usize,
    row_ratio: f64,
    fill: f64,
}

#[derive(Serialize)]
struct AssembleCsv {
    n: usize,
    max_abs: f64,
    frobenius: f64,
    max_asymmetry: f64,
    diag_min: f64,
    diag_max: f64,
}

#[derive(Serialize)]
struct MatrixCsv {
    row_index: usize,
    col_index: usize,
    value: f64,
}

#[derive(Serialize)]
struct AuditCsv {
    oracle: &'static str,
    samples: usize,
    c_fit: f64,
    max_over_median: f64,
    spearman: f64,
    pass: bool,
}

#[derive(Serialize)]
struct AuditSampleCsv {
    oracle: &'static str,
    row_index: usize,
    col_index: usize,
    level_sum: u32,
    entry: f64,
    bound: f64,
}

#[derive(Serialize)]
struct AdjacencyCsv {
    patch_a: usize,
    patch_b: usize,
    tag: &'static str,
}

/// Runs one configured command and returns its outputs without writing them.
pub fn execute(c: &Config) -> Result<(Outputs, Value), CliError> {
    let mut out = Outputs::default();
    let mut results = json!({});
    match c.command {
        Command::BasisCheck => {
            let fam = build_family(c.family_order, c.j).map_err(|e| CliError::Guard(e.to_string()))?;
            let rows = basis_check(&fam, c.j);
            results["max_gram_err"] = json!(rows.iter().map(|r| r.gram_err).fold(0.0, f64::max));
            results["max_moment_err"] = json!(rows.iter().map(|r| r.moment_err).fold(0.0, f64::max));
            out.csv("basis_check.csv", &rows)?;
        }
        Command::Sstar => {
            let rows: Vec<SstarCsv> = sstar_table(c.alpha, c.sigma_shift)
                .into_iter()
                .map(|r| SstarCsv {
                    d: r.d,
                    q2: r.q2,
                    alpha: r.alpha,
                    min_d_tilde: r.min_d_tilde.map_or("-".to_string(), |v| v.to_string()),
                })
                .collect();
            out.csv("sstar.csv", &rows)?;
        }
        Command::Assemble => {
            let s = setup(c, MAX_DENSE, "dense assembly")?;
            let m = dense(c, &s)?;
            let n = m.n;
            let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
            out.csv(
                "assemble.csv",
                &[AssembleCsv {
                    n,
                    max_abs: m.data.iter().fold(0.0, |a, b| a.max(b.abs())),
                    frobenius: m.data.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    max_asymmetry: m.max_asymmetry(),
                    diag_min: diag.iter().copied().fold(f64::INFINITY, f64::min),
                    diag_max: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }],
            )?;
            if n <= FULL_DUMP {
                let rows: Vec<MatrixCsv> = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| MatrixCsv { row_index: i, col_index: j, value: m.get(i, j) })
                    .collect();
                out.csv("matrix.csv", &rows)?;
            }
            results["n"] = json!(n);
        }
        Command::Compress => {
            let s = setup(c, MAX_DENSE, "compression")?;
            let m = dense(c, &s)?;
            let w = &s.window;
            let n = w.dim();
            let mut meta = Vec::new();
            for r in c.rs() {
                let p = c.params(r);
                let pb = PatternBuilder::new(w, s.domain(), p);
                let pattern = pb.build();
                let mut rows = Vec::new();
                let row = |i: usize, j: usize, stage: &'static str| {
                    let (a, b) = (&w.indices[i], &w.indices[j]);
                    PatternCsv {
                        row_index: i,
                        col_index: j,
                        jx: a.jx(),
                        jy: a.jy(),
                        jx2: b.jx(),
                        jy2: b.jy(),
                        stage,
                        value: m.get(i, j),
                    }
                };
                if n <= FULL_DUMP {
                    for i in 0..n {
                        for j in 0..n {
                            rows.push(row(i, j, pb.stage(i, j).as_str()));
                        }
                    }
                } else {
                    for i in 0..n {
                        for &j in pattern.row(i) {
                            rows.push(row(i, j as usize, "kept"));
                        }
                    }
                }
                out.csv(&format!("pattern_r{r}.csv"), &rows)?;
                let op = compress_with(pattern, p, &m);
                if !op.values_finite() {
                    return Err(CliError::Runtime(format!("non-finite entries at r = {r}")));
                }
                let md = op.metadata();
                out.json(&format!("operator_r{r}.json"), &serde_json::to_value(&md).map_err(runtime)?)?;
                meta.push(json!({"r": r, "nnz": md.nnz, "nnz_row_max": md.nnz_row_max}));
            }
            results["n"] = json!(n);
            results["operators"] = Value::Array(meta);
        }
        Command::VerifyDecay => {
            let s = setup(c, MAX_DENSE, "decay verification")?;
            decay_outputs(c, &s, &mut out, &mut results)?;
        }
        Command::Complexity => {
            let s = setup(c, MAX_PATTERN, "pattern enumeration")?;
            let n = s.window.dim();
            let rows: Vec<ComplexityCsv> = c
                .rs()
                .into_iter()
                .map(|r| {
                    let p = PatternBuilder::new(&s.window, s.domain(), c.params(r)).build();
                    let d = DecayRow {
                        r,
                        nnz_total: p.nnz(),
                        nnz_row_max: p.row_max(),
                        err_norm_est: f64::NAN,
                        norm_converged: false,
                        schur_tail_max: f64::NAN,
                        runtime_s: 0.0,
                    };
                    ComplexityCsv {
                        r,
                        n,
                        nnz_total: d.nnz_total,
                        nnz_row_max: d.nnz_row_max,
                        row_ratio: if r == 0 { f64::NAN } else { row_ratio(&d) },
                        fill: d.nnz_total as f64 / (n as f64 * n as f64),
                    }
                })
                .collect();
            results["n"] = json!(n);
            out.csv("complexity.csv", &rows)?;
        }
        Command::BoundsAudit => {
            if c.geometry != Preset::UnitSquare {
                return Err(CliError::Runtime("bounds-audit runs on the unit square only".into()));
            }
            let s = setup(c, MAX_DENSE, "bounds audit")?;
            let m = dense(c, &s)?;
            let floor = 1e-13 * m.data.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let dt = s.window.family.vanishing_moments as f64;
            let mut summary = Vec::new();
            let mut all = Vec::new();
            for o in Oracle::ALL {
                let smp = audit_samples(&s.window, &m, o, dt, 0.5 * c.q2, AUDIT_SAMPLES, floor, c.seed);
                let sm = summarize_audit(o, &smp);
                summary.push(AuditCsv {
                    oracle: o.as_str(),
                    samples: sm.samples,
                    c_fit: sm.c_fit,
                    max_over_median: sm.max_over_median,
                    spearman: sm.spearman,
                    pass: sm.passes(AUDIT_SAMPLES),
                });
                all.extend(smp.into_iter().map(|x| AuditSampleCsv {
                    oracle: o.as_str(),
                    row_index: x.row,
                    col_index: x.col,
                    level_sum: x.level_sum,
                    entry: x.entry,
                    bound: x.bound,
                }));
            }
            results["all_pass"] = json!(summary.iter().all(|s| s.pass));
            out.csv("bounds_audit.csv", &summary)?;
            out.csv("bounds_samples.csv", &all)?;
        }
        Command::ManifoldDemo => {
            let s = setup(c, MAX_DENSE, "manifold demo")?;
            let g = s.geometry.clone().unwrap_or_else(|| PatchGeometry::preset(Preset::UnitSquare));
            let p = g.patch_count();
            let adj: Vec<AdjacencyCsv> = (0..p)
                .flat_map(|a| (0..p).map(move |b| (a, b)))
                .map(|(a, b)| AdjacencyCsv { patch_a: a, patch_b: b, tag: g.adjacency(a, b).tag() })
                .collect();
            out.csv("adjacency.csv", &adj)?;
            let dist = distance_samples(&g, &s.window, DISTANCE_SAMPLES, c.seed);
            let l = g.lipschitz;
            let within = dist.iter().all(|d| d.ratio >= 1.0 / l && d.ratio <= l);
            out.csv("distances.csv", &dist)?;
            results["geometry"] = json!({
                "name": g.name,
                "patches": p,
                "lipschitz": l,
                "separation_floor": if g.separation_floor.is_finite() { json!(g.separation_floor) } else { Value::Null },
                "weight_bounds": g.weight_bounds,
                "adjacent_pairs": adj.iter().filter(|a| matches!(g.adjacency(a.patch_a, a.patch_b), Adjacency::Edge(_) | Adjacency::Vertex(_))).count(),
            });
            results["distance_samples"] = json!(dist.len());
            results["distance_ratios_within_band"] = json!(within);
            decay_outputs(c, &s, &mut out, &mut results)?;
        }
    }
    Ok((out, results))
}

fn run_config(c: &Config) -> Result<(), CliError> {
    let t = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(c.threads).build().map_err(runtime)?;
    let (mut out, results) = pool.install(|| execute(c))?;
    let mut names = out.names();
    names.push("manifest.json".to_string());
    let manifest = json!({
        "command": c.command.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": c.to_json(),
        "outputs": names,
        "results": results,
        "timings": {"total_s": t.elapsed().as_secs_f64()},
    });
    out.json("manifest.json", &manifest)?;
    out.commit(&c.out_dir)
}

/// Entry point behind `main`; returns the process exit status.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let args: Vec<String> = args.into_iter().collect();
    let res = match args.as_slice() {
        [] => Err(CliError::Usage(format!("missing config file\n\n{}", help_text()))),
        [a] if a == "--help" || a == "-h" => {
            print!("{}", help_text());
            return 0;
        }
        [path] => fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config `{path}`: {e}")))
            .and_then(|text| Ok(Config::parse(&text)?))
            .and_then(|c| run_config(&c)),
        _ => Err(CliError::Usage(format!("expected one config file\n\n{}", help_text()))),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("anisowave: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_defaults() {
        let c = Config::parse("# demo\ncommand = sstar\n\nJ = 3\nkernel = log\n").unwrap();
        assert_eq!(c.command, Command::Sstar);
        assert_eq!(c.j, 3);
        assert_eq!(c.q2, 0.0);
        assert_eq!(c.r_max, 6);
    }

    #[test]
    fn errors_carry_lines() {
        let e = Config::parse("J = 3\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Config::parse("J = 3\n\nJ = 4\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = Config::parse("alpha 2\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = Config::parse("r_min = 5\nr_max = 2\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.to_string().starts_with("line 2:"));
    }
}
