//! Configured experiment runs: TOML config, registries, and reproducible CSV/JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::chaos::{
    chaos_gamma_closed, exp_series_check, orthogonality_grid, product_formula_check, second_quantization_check,
    MarkFn, MultipleIntegral, ProductKernel, ResamplingSemigroup,
};
use crate::configuration::{read_configuration, sample_configuration, Configuration, CurveMap, IntensityModel, MarkLaw1};
use crate::diagnostics::{
    centering_check, ecf, kde, laplace_check, lemma8_check, mark_identities_check, marked_moment_check, rajchman_demo,
    statistical_suite, Bandwidth, Kde, MarkedIntegrand,
};
use crate::error::Error;
use crate::functionals::{
    area, doleans, generalized_ou, jump_sde, nearest_point, pair_doleans, path_eval, running_sup, time_integral,
    FnFunctional, Functional, ScalarMap, SdeCoefficients, StepFunction,
};
use crate::lent_particle::{carre_du_champ, det_positivity_survey, relative_frobenius, GammaSpec, Mode};
use crate::report::EstimatorReport;
use crate::rng::{derive_seed, par_map, Jobs};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown {registry} `{label}`")]
    Registry { registry: &'static str, label: String },
    #[error(transparent)]
    Engine(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit status: 2 for malformed configs, 3 for registry misses, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse { .. } | RunError::Config(_) => 2,
            RunError::Registry { .. } => 3,
            _ => 1,
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub functional: Option<FunctionalSection>,
    pub gamma: Option<GammaSection>,
    pub experiment: ExperimentSection,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub rate: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub epsilon: Option<f64>,
    pub angular_density: Option<f64>,
    pub start: Option<i32>,
    pub n_max: Option<i32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    pub label: String,
    pub t: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub map: Option<String>,
    pub sde: Option<String>,
    pub delta: Option<f64>,
    pub breaks: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub label: String,
    pub basis: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: String,
    pub name: Option<String>,
    #[serde(default = "default_nsamples")]
    pub nsamples: usize,
    #[serde(default)]
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub threshold: Option<f64>,
    pub n_inner: Option<usize>,
    pub oracle_samples: Option<usize>,
    pub configuration: Option<String>,
    pub checks: Option<Vec<String>>,
    pub probe: Option<String>,
    pub scale: Option<f64>,
    pub sup: Option<f64>,
    pub degrees: Option<Vec<usize>>,
    pub t: Option<f64>,
    pub u_grid: Option<Vec<f64>>,
    pub npoints: Option<usize>,
    pub bandwidth: Option<f64>,
    pub ks: Option<Vec<u32>>,
    pub n_max: Option<i32>,
}

fn default_nsamples() -> usize {
    1000
}

/// A registry entry: label and parameter schema.
#[derive(Debug, Clone, Copy)]
pub struct Entry {
    pub label: &'static str,
    pub params: &'static str,
}

const fn entry(label: &'static str, params: &'static str) -> Entry {
    Entry { label, params }
}

pub const MODELS: &[Entry] = &[
    entry("atomic_dyadic", "horizon, start = 0, n_max"),
    entry("curve_image", "horizon, c, a, epsilon (parabola image of the one-sided power model)"),
    entry("gaussian", "horizon, dim, rate, mean, sd"),
    entry("polar", "horizon, angular_density, epsilon"),
    entry("power", "horizon, c, a, epsilon"),
    entry("symmetric_power", "horizon, c, a, epsilon"),
    entry("uniform", "horizon, dim, rate, lo, hi"),
];

pub const FUNCTIONALS: &[Entry] = &[
    entry("area", "t = horizon (planar marks)"),
    entry("doleans", "t = horizon"),
    entry("gou", "t = horizon, x0 = [1.0] (planar marks)"),
    entry("jump_sde", "t = horizon, sde = additive | example9, x0, delta = 0.01"),
    entry("nearest", ""),
    entry("pair_doleans", "t = horizon"),
    entry("path_eval", "t = horizon"),
    entry("sup", "t = horizon, breaks = [], values = [0.0]"),
    entry("time_integral", "t = horizon, map = identity | square | sine"),
];

pub const GAMMAS: &[Entry] = &[
    entry("curve", "basis (planar marks, parabola)"),
    entry("diag_x2", "basis"),
    entry("identity", "basis"),
    entry("polar", "basis (planar marks)"),
];

pub const EXPERIMENTS: &[Entry] = &[
    entry("chaos", "checks = [exp_series, product_formula, orthogonality, chaos_gamma, second_quantization], probe, scale, sup, degrees, t, n_inner, oracle_samples, tolerance"),
    entry("density", "nsamples, npoints = 200, bandwidth, u_grid"),
    entry("gamma", "configuration (file or fixture:example1) | nsamples, tolerance = 1e-6"),
    entry("identity", "checks = [laplace, lemma8, marked_moment, mark_identities, centering, suite], probe, scale, n_inner"),
    entry("rajchman", "ks = [0..8], n_max = 30, nsamples, tolerance = 0.002"),
    entry("survey", "nsamples, tolerance = 1e-12, threshold"),
];

pub const PROBES: &[Entry] = &[
    entry("cos", "cos x₁"),
    entry("indicator", "scale·1{x₁ > 0}"),
    entry("linear", "scale·x₁"),
    entry("square", "x₁²"),
    entry("zero", "0"),
];

/// Entries of a named registry, in stable alphabetical order.
pub fn registry(name: &str) -> RunResult<&'static [Entry]> {
    match name {
        "models" => Ok(MODELS),
        "functionals" => Ok(FUNCTIONALS),
        "gammas" => Ok(GAMMAS),
        "experiments" => Ok(EXPERIMENTS),
        "probes" => Ok(PROBES),
        other => Err(RunError::Registry { registry: "registry", label: other.to_string() }),
    }
}

pub fn list(name: &str) -> RunResult<String> {
    let entries = registry(name)?;
    let width = entries.iter().map(|e| e.label.len()).max().unwrap_or(0);
    Ok(entries.iter().map(|e| format!("{:width$}  {}\n", e.label, e.params)).collect())
}

/// Parses a config, reporting the 1-based line and column of the first error.
pub fn parse_config(text: &str) -> RunResult<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
        RunError::Parse { line, column, message: e.message().to_string() }
    })
}

fn need<T: Copy>(v: Option<T>, section: &str, key: &str) -> RunResult<T> {
    v.ok_or_else(|| RunError::Config(format!("[{section}] requires `{key}`")))
}

pub fn build_model(m: &ModelSection) -> RunResult<IntensityModel> {
    let p = |v, k| need(v, "model", k);
    let model = match m.family.as_str() {
        "uniform" => IntensityModel::uniform(m.horizon, p(m.rate, "rate")?, p(m.lo, "lo")?, p(m.hi, "hi")?, m.dim)?,
        "gaussian" => IntensityModel::compound_poisson(
            m.horizon,
            p(m.rate, "rate")?,
            vec![MarkLaw1::Normal { mean: p(m.mean, "mean")?, sd: p(m.sd, "sd")? }; m.dim],
        )?,
        "power" => IntensityModel::power(m.horizon, p(m.c, "c")?, p(m.a, "a")?, p(m.epsilon, "epsilon")?)?,
        "symmetric_power" => {
            IntensityModel::symmetric_power(m.horizon, p(m.c, "c")?, p(m.a, "a")?, p(m.epsilon, "epsilon")?)?
        }
        "polar" => IntensityModel::polar(m.horizon, p(m.angular_density, "angular_density")?, p(m.epsilon, "epsilon")?)?,
        "curve_image" => {
            let base = IntensityModel::power(m.horizon, p(m.c, "c")?, p(m.a, "a")?, p(m.epsilon, "epsilon")?)?;
            IntensityModel::curve_image(&base, CurveMap::parabola())?
        }
        "atomic_dyadic" => IntensityModel::atomic_dyadic(m.horizon, m.start.unwrap_or(0), need(m.n_max, "model", "n_max")?)?,
        other => return Err(RunError::Registry { registry: "model", label: other.to_string() }),
    };
    Ok(model.with_label(m.family.clone()))
}

pub fn build_functional(f: &FunctionalSection, model: &IntensityModel) -> RunResult<Arc<dyn Functional>> {
    let t = f.t.unwrap_or(model.horizon());
    let out: Arc<dyn Functional> = match f.label.as_str() {
        "path_eval" => Arc::new(path_eval(model, t)?),
        "doleans" => Arc::new(doleans(model, t)?),
        "pair_doleans" => Arc::new(pair_doleans(model, t)?),
        "area" => Arc::new(area(model, t)?),
        "time_integral" => {
            let name = f.map.as_deref().unwrap_or("identity");
            let map = ScalarMap::by_name(name).ok_or_else(|| RunError::Registry { registry: "map", label: name.to_string() })?;
            Arc::new(time_integral(model, map, t)?)
        }
        "gou" => {
            let x0 = f.x0.as_ref().and_then(|v| v.first().copied()).unwrap_or(1.0);
            Arc::new(generalized_ou(model, x0, t)?)
        }
        "sup" => {
            let k = match (&f.breaks, &f.values) {
                (None, None) => StepFunction::zero(),
                (b, v) => StepFunction::new(b.clone().unwrap_or_default(), v.clone().unwrap_or_else(|| vec![0.0]))?,
            };
            Arc::new(running_sup(model, t, k)?)
        }
        "nearest" => Arc::new(nearest_point(model)),
        "jump_sde" => {
            let name = f.sde.as_deref().unwrap_or("additive");
            let coef = match name {
                "additive" => SdeCoefficients::additive(model),
                "example9" => SdeCoefficients::example9(model)?,
                other => return Err(RunError::Registry { registry: "sde", label: other.to_string() }),
            };
            let x0 = f.x0.clone().unwrap_or_else(|| vec![0.0; coef.state_dim]);
            Arc::new(jump_sde(model, coef, x0, t, f.delta.unwrap_or(0.01))?)
        }
        other => return Err(RunError::Registry { registry: "functional", label: other.to_string() }),
    };
    Ok(out)
}

pub fn build_gamma(g: Option<&GammaSection>, dim: usize) -> RunResult<GammaSpec> {
    let label = g.map(|g| g.label.as_str()).unwrap_or("diag_x2");
    let spec = GammaSpec::by_name(label, dim).ok_or_else(|| RunError::Registry { registry: "gamma", label: label.to_string() })?;
    match g.and_then(|g| g.basis) {
        Some(k) => Ok(spec.with_basis(k)?),
        None => Ok(spec),
    }
}

pub fn build_probe(name: &str, scale: f64) -> RunResult<MarkFn> {
    Ok(match name {
        "zero" => MarkFn::new("0", 0.0, |_| 0.0).with_gradient(|x| vec![0.0; x.len()]),
        "linear" => MarkFn::new(format!("{scale}x"), scale.abs(), move |x| scale * x[0]).with_gradient(move |x| {
            let mut g = vec![0.0; x.len()];
            g[0] = scale;
            g
        }),
        "cos" => MarkFn::new("cos x", 1.0, |x| x[0].cos()).with_gradient(|x| {
            let mut g = vec![0.0; x.len()];
            g[0] = -x[0].sin();
            g
        }),
        "square" => MarkFn::new("x^2", 1.0, |x| x[0] * x[0]).with_gradient(|x| {
            let mut g = vec![0.0; x.len()];
            g[0] = 2.0 * x[0];
            g
        }),
        "indicator" => MarkFn::new(format!("{scale}*1{{x>0}}"), scale.abs(), move |x| if x[0] > 0.0 { scale } else { 0.0 }),
        other => return Err(RunError::Registry { registry: "probe", label: other.to_string() }),
    })
}

/// The configuration ω = {(0.2, 0.5), (0.6, −0.2)} on [0, 1].
pub fn example1_fixture() -> Configuration {
    Configuration::new(
        1.0,
        1,
        vec![
            crate::configuration::Atom::scalar(0.2, 0.5).expect("valid atom"),
            crate::configuration::Atom::scalar(0.6, -0.2).expect("valid atom"),
        ],
        "fixture:example1",
    )
    .expect("valid fixture")
}

/// Named fixture configurations shipped with the tool.
pub fn fixtures() -> Vec<(&'static str, Configuration)> {
    vec![("example1", example1_fixture())]
}

fn load_configuration(spec: &str, base_dir: &Path) -> RunResult<Configuration> {
    if let Some(name) = spec.strip_prefix("fixture:") {
        return fixtures()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| c)
            .ok_or_else(|| RunError::Registry { registry: "fixture", label: name.to_string() });
    }
    let path = base_dir.join(spec);
    let file = fs::File::open(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
    Ok(read_configuration(std::io::BufReader::new(file))?)
}

/// A CSV cell, formatted with 17 significant digits when numeric.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&str]) -> Table {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }
}

fn reports_table(reports: &[EstimatorReport]) -> Table {
    let mut t = Table::new(&["identity", "estimate_re", "estimate_im", "reference_re", "reference_im", "se_re", "se_im", "n", "pass"]);
    for r in reports {
        t.push(vec![
            Cell::Text(r.identity.clone()),
            r.estimate.re().into(),
            r.estimate.im().into(),
            r.reference.re().into(),
            r.reference.im().into(),
            r.se.re().into(),
            r.se.im().into(),
            r.n.into(),
            Cell::Text(r.pass.to_string()),
        ]);
    }
    t
}

/// What an experiment produced before it is written to disk.
#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub reports: Vec<EstimatorReport>,
    pub tables: Vec<(String, Table)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub jobs: Jobs,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<EstimatorReport>,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
    pub pass: bool,
}

struct Provenance {
    config_sha256: String,
    seed: u64,
    version: &'static str,
}

fn write_csv(path: &Path, prov: &Provenance, table: &Table) -> RunResult<()> {
    let io = |source| RunError::Io { path: path.to_path_buf(), source };
    let mut buf = format!(
        "# config_sha256={} seed={} version={}\n",
        prov.config_sha256, prov.seed, prov.version
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns).map_err(|e| io(e.into()))?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(|e| io(e.into()))?;
    }
    let body = w.into_inner().map_err(|e| io(e.into_error()))?;
    buf.push_str(&String::from_utf8_lossy(&body));
    fs::write(path, buf).map_err(io)
}

/// Runs the experiment described by `text`; artifacts land in `opts.out_dir`.
pub fn run(text: &str, base_dir: &Path, opts: &RunOptions) -> RunResult<RunOutcome> {
    let cfg = parse_config(text)?;
    let seed = opts.seed.unwrap_or(cfg.experiment.seed);
    let model = build_model(&cfg.model)?;
    let output = match cfg.experiment.kind.as_str() {
        "gamma" => gamma_experiment(&cfg, &model, base_dir, seed, opts.jobs)?,
        "survey" => survey_experiment(&cfg, &model, seed, opts.jobs)?,
        "identity" => identity_experiment(&cfg, &model, seed, opts.jobs)?,
        "chaos" => chaos_experiment(&cfg, &model, seed, opts.jobs)?,
        "density" => density_experiment(&cfg, &model, seed, opts.jobs)?,
        "rajchman" => rajchman_experiment(&cfg, seed, opts.jobs)?,
        other => return Err(RunError::Registry { registry: "experiment", label: other.to_string() }),
    };

    let prov = Provenance {
        config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        seed,
        version: env!("CARGO_PKG_VERSION"),
    };
    let name = cfg.experiment.name.clone().unwrap_or_else(|| cfg.experiment.kind.clone());
    fs::create_dir_all(&opts.out_dir).map_err(|source| RunError::Io { path: opts.out_dir.clone(), source })?;
    let mut artifacts = Vec::new();
    let mut tables = output.tables;
    tables.push(("reports".to_string(), reports_table(&output.reports)));
    for (suffix, table) in &tables {
        let path = opts.out_dir.join(format!("{name}_{suffix}.csv"));
        write_csv(&path, &prov, table)?;
        artifacts.push(path);
    }
    let pass = output.reports.iter().all(|r| r.pass);
    let doc = json!({
        "provenance": { "config_sha256": prov.config_sha256, "seed": prov.seed, "version": prov.version },
        "experiment": cfg.experiment.kind,
        "model": model.label(),
        "pass": pass,
        "notes": output.notes,
        "reports": output.reports,
    });
    let json_path = opts.out_dir.join(format!("{name}.json"));
    let body = serde_json::to_string_pretty(&doc).expect("reports serialize") + "\n";
    fs::write(&json_path, body).map_err(|source| RunError::Io { path: json_path.clone(), source })?;
    artifacts.push(json_path);

    let mut summary = String::new();
    for note in &output.notes {
        let _ = writeln!(summary, "{note}");
    }
    for r in &output.reports {
        let _ = writeln!(summary, "{}", r.summary());
    }
    let passed = output.reports.iter().filter(|r| r.pass).count();
    let _ = writeln!(summary, "{passed}/{} checks passed", output.reports.len());
    Ok(RunOutcome { reports: output.reports, artifacts, summary, pass })
}

fn functional_of(cfg: &RunConfig, model: &IntensityModel) -> RunResult<Arc<dyn Functional>> {
    let section = cfg.functional.as_ref().ok_or_else(|| RunError::Config("a [functional] section is required".into()))?;
    build_functional(section, model)
}

fn matrix_note(label: &str, m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:.12}")).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("{label} = [{}]", rows.join(", "))
}

fn gamma_experiment(cfg: &RunConfig, model: &IntensityModel, base_dir: &Path, seed: u64, jobs: Jobs) -> RunResult<ExperimentOutput> {
    let f = functional_of(cfg, model)?;
    let spec = build_gamma(cfg.gamma.as_ref(), model.dim())?;
    let exp = &cfg.experiment;
    let tol = exp.tolerance.unwrap_or(1e-6);
    let configurations: Vec<Configuration> = match &exp.configuration {
        Some(spec) => vec![load_configuration(spec, base_dir)?],
        None => par_map(exp.nsamples, jobs, |i| sample_configuration(model, derive_seed(seed, i as u64)))?,
    };
    let results = par_map(configurations.len(), jobs, |i| {
        let closed = carre_du_champ(f.as_ref(), &configurations[i], &spec, Mode::Closed)?;
        let fd = carre_du_champ(f.as_ref(), &configurations[i], &spec, Mode::Fd)?;
        Ok((closed, fd))
    })?;
    let mut table = Table::new(&["sample", "n_atoms", "i", "j", "closed", "fd"]);
    let mut worst: f64 = 0.0;
    for (s, (closed, fd)) in results.iter().enumerate() {
        worst = worst.max(relative_frobenius(&closed.matrix, &fd.matrix));
        for i in 0..closed.matrix.nrows() {
            for j in 0..closed.matrix.ncols() {
                table.push(vec![s.into(), configurations[s].len().into(), i.into(), j.into(), closed.matrix[(i, j)].into(), fd.matrix[(i, j)].into()]);
            }
        }
    }
    let mut notes = Vec::new();
    if let [(closed, _)] = results.as_slice() {
        notes.push(matrix_note(&format!("Gamma[{}]", f.label()), &closed.matrix));
        notes.push(format!("det = {:.12}", closed.det()));
    }
    let report = EstimatorReport::deterministic(format!("gamma_closed_vs_fd[{}]", f.label()), worst, 0.0, tol, results.len());
    Ok(ExperimentOutput { reports: vec![report], tables: vec![("gamma".into(), table)], notes })
}

fn survey_experiment(cfg: &RunConfig, model: &IntensityModel, seed: u64, jobs: Jobs) -> RunResult<ExperimentOutput> {
    let f = functional_of(cfg, model)?;
    let spec = build_gamma(cfg.gamma.as_ref(), model.dim())?;
    let exp = &cfg.experiment;
    let tol = exp.tolerance.unwrap_or(1e-12);
    let lambda_t = model.rate() * model.horizon();
    let threshold = exp.threshold.unwrap_or(1.0 - 2.0 * (-lambda_t).exp() - 1e-3);
    let survey = det_positivity_survey(f.as_ref(), &spec, model, exp.nsamples, tol, seed, jobs)?;
    let mut table = Table::new(&["seed", "n_atoms", "nondegenerate", "det", "trace", "min_eig", "simplified_criterion_fraction"]);
    for r in &survey.rows {
        table.push(vec![Cell::Text(r.seed.to_string()), r.n_atoms.into(), Cell::Text(r.nondegenerate.to_string()), r.det.into(), r.trace.into(), r.min_eig.into(), r.simplified_criterion_fraction.into()]);
    }
    // frequency ≥ threshold, phrased as |frequency − 1| ≤ 1 − threshold
    let report = EstimatorReport::deterministic(
        format!("det_positivity[{}]", f.label()),
        survey.frequency,
        1.0,
        1.0 - threshold,
        exp.nsamples,
    );
    let notes = vec![format!("det-positivity frequency {:.6} (threshold {threshold:.6})", survey.frequency)];
    Ok(ExperimentOutput { reports: vec![report], tables: vec![("survey".into(), table)], notes })
}

fn identity_experiment(cfg: &RunConfig, model: &IntensityModel, seed: u64, jobs: Jobs) -> RunResult<ExperimentOutput> {
    let exp = &cfg.experiment;
    let probe = build_probe(exp.probe.as_deref().unwrap_or("linear"), exp.scale.unwrap_or(0.3))?;
    let checks = exp.checks.clone().unwrap_or_else(|| vec!["laplace".into()]);
    let n = exp.nsamples;
    let n_inner = exp.n_inner.unwrap_or(16);
    let mut reports = Vec::new();
    for (k, check) in checks.iter().enumerate() {
        let key = derive_seed(seed, k as u64);
        match check.as_str() {
            "laplace" => reports.push(laplace_check(model, &probe, n, key, jobs)?),
            "lemma8" => {
                let g: Arc<dyn Functional> = match &cfg.functional {
                    Some(_) => functional_of(cfg, model)?,
                    None => Arc::new(FnFunctional::constant(vec![1.0], model.dim())),
                };
                let (plus, minus) = lemma8_check(model, g.as_ref(), &probe, n, key, jobs)?;
                reports.extend([plus, minus]);
            }
            "marked_moment" => {
                let f = MarkedIntegrand::new("x(r-1/2)", |_, x, r| x[0] * (r - 0.5), |_, _| 0.0, |_, x| x[0] * x[0] / 12.0);
                reports.push(marked_moment_check(model, &f, n, key, jobs)?);
            }
            "mark_identities" => {
                let rho = |s: f64| if s == 0.0 { 1.0 } else { -(-s).exp_m1() / s };
                let f = MarkedIntegrand::new(
                    "exp(-x^2 r)",
                    |_, x, r| (-x[0] * x[0] * r).exp(),
                    move |_, x| rho(x[0] * x[0]),
                    move |_, x| rho(2.0 * x[0] * x[0]),
                );
                let (a, b) = mark_identities_check(model, &f, n, n_inner, key, jobs)?;
                reports.extend([a, b]);
            }
            "centering" => {
                let (a, b) = centering_check(model, n, key, jobs)?;
                reports.extend([a, b]);
            }
            "suite" => reports.extend(statistical_suite(n, n_inner, key, jobs)?),
            other => return Err(RunError::Registry { registry: "identity check", label: other.to_string() }),
        }
    }
    Ok(ExperimentOutput { reports, ..Default::default() })
}

fn chaos_experiment(cfg: &RunConfig, model: &IntensityModel, seed: u64, jobs: Jobs) -> RunResult<ExperimentOutput> {
    let exp = &cfg.experiment;
    let mut u = build_probe(exp.probe.as_deref().unwrap_or("linear"), exp.scale.unwrap_or(1.0))?;
    if let Some(sup) = exp.sup {
        u = u.with_sup(sup);
    }
    let checks = exp.checks.clone().unwrap_or_else(|| vec!["exp_series".into(), "product_formula".into(), "orthogonality".into()]);
    let degrees = exp.degrees.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let n = exp.nsamples;
    let radius_t = if u.sup() > 0.0 { 0.06 / u.sup() } else { 0.06 };
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    for (k, check) in checks.iter().enumerate() {
        let key = derive_seed(seed, k as u64);
        let oracle_n = exp.oracle_samples.unwrap_or(n);
        let configs = || par_map(oracle_n, jobs, |i| sample_configuration(model, derive_seed(key, i as u64)));
        match check.as_str() {
            "exp_series" => {
                let cfgs = configs()?;
                let res = par_map(cfgs.len(), jobs, |i| exp_series_check(&cfgs[i], model, &u, radius_t, 12))?;
                let mut table = Table::new(&["sample", "lhs", "rhs", "residual", "tail_bound"]);
                for (i, r) in res.iter().enumerate() {
                    table.push(vec![i.into(), r.lhs.into(), r.rhs.into(), r.residual.into(), r.tail_bound.into()]);
                }
                let worst = res.iter().map(|r| r.residual).fold(0.0, f64::max);
                reports.push(EstimatorReport::deterministic("exp_series", worst, 0.0, exp.tolerance.unwrap_or(1e-8), oracle_n));
                tables.push(("exp_series".into(), table));
            }
            "product_formula" => {
                let cfgs = configs()?;
                let res = par_map(cfgs.len(), jobs, |i| product_formula_check(&cfgs[i], model, &u, &u, radius_t, radius_t))?;
                let worst = res.iter().copied().fold(0.0, f64::max);
                reports.push(EstimatorReport::deterministic("product_formula", worst, 0.0, 1e-10, oracle_n));
            }
            "orthogonality" => reports.extend(orthogonality_grid(model, &u, &u, &degrees, n, key, jobs)?),
            "chaos_gamma" => {
                let spec = build_gamma(cfg.gamma.as_ref(), model.dim())?;
                let cfgs = configs()?;
                let mut worst: f64 = 0.0;
                for &i in &degrees {
                    for &j in &degrees {
                        let fi = MultipleIntegral::new(model, ProductKernel::power(&u, i)?)?;
                        let fj = MultipleIntegral::new(model, ProductKernel::power(&u, j)?)?;
                        let pair = crate::functionals::Stack::new(vec![Arc::new(fi), Arc::new(fj)])?;
                        let errs = par_map(cfgs.len(), jobs, |s| {
                            let closed = chaos_gamma_closed(&cfgs[s], model, &u, &u, i, j, &spec)?;
                            let fd = carre_du_champ(&pair, &cfgs[s], &spec, Mode::Fd)?.matrix[(0, 1)];
                            Ok((closed - fd).abs() / closed.abs().max(fd.abs()).max(1e-300))
                        })?;
                        worst = worst.max(errs.into_iter().fold(0.0, f64::max));
                    }
                }
                reports.push(EstimatorReport::deterministic("chaos_gamma_vs_fd", worst, 0.0, exp.tolerance.unwrap_or(1e-6), oracle_n));
            }
            "second_quantization" => {
                let sg = ResamplingSemigroup::new(model);
                let t = exp.t.unwrap_or(0.2);
                for &d in &degrees {
                    reports.push(second_quantization_check(&sg, &u, d, t, n, exp.n_inner.unwrap_or(64), derive_seed(key, d as u64), jobs)?);
                }
            }
            other => return Err(RunError::Registry { registry: "chaos check", label: other.to_string() }),
        }
    }
    Ok(ExperimentOutput { reports, tables, notes: Vec::new() })
}

fn density_experiment(cfg: &RunConfig, model: &IntensityModel, seed: u64, jobs: Jobs) -> RunResult<ExperimentOutput> {
    let f = functional_of(cfg, model)?;
    let exp = &cfg.experiment;
    let bandwidth = exp.bandwidth.map(Bandwidth::Fixed).unwrap_or(Bandwidth::Silverman);
    let estimate = kde(f.as_ref(), model, exp.nsamples, bandwidth, exp.npoints.unwrap_or(200), seed, jobs)?;
    let mut tables = Vec::new();
    let mut notes = Vec::new();
    let (mass, degenerate) = match &estimate {
        Kde::One(k) => {
            let mut t = Table::new(&["x", "density"]);
            for (x, d) in k.grid.iter().zip(&k.density) {
                t.push(vec![(*x).into(), (*d).into()]);
            }
            tables.push(("kde".into(), t));
            if let Some(atom) = k.atom {
                notes.push(format!("degenerate law: atom at {atom}"));
            }
            (k.mass, k.degenerate)
        }
        Kde::Two(k) => {
            let mut t = Table::new(&["x", "y", "density"]);
            for (iy, y) in k.ys.iter().enumerate() {
                for (ix, x) in k.xs.iter().enumerate() {
                    t.push(vec![(*x).into(), (*y).into(), k.density[iy * k.xs.len() + ix].into()]);
                }
            }
            tables.push(("kde".into(), t));
            (k.mass, k.degenerate)
        }
    };
    let mut reports = Vec::new();
    if !degenerate {
        reports.push(EstimatorReport::deterministic(format!("kde_mass[{}]", f.label()), mass, 1.0, 1e-3, exp.nsamples));
    }
    if f.out_dim() == 1 {
        let grid = exp.u_grid.clone().unwrap_or_else(|| (0..=40).map(|i| i as f64).collect());
        let points = ecf(f.as_ref(), model, exp.nsamples, &grid, derive_seed(seed, 1), jobs)?;
        let mut t = Table::new(&["u", "modulus", "se"]);
        for p in points {
            t.push(vec![p.u.into(), p.modulus.into(), p.se.into()]);
        }
        tables.push(("ecf".into(), t));
    }
    Ok(ExperimentOutput { reports, tables, notes })
}

fn rajchman_experiment(cfg: &RunConfig, seed: u64, jobs: Jobs) -> RunResult<ExperimentOutput> {
    let exp = &cfg.experiment;
    let ks = exp.ks.clone().unwrap_or_else(|| (0..=8).collect());
    let demo = rajchman_demo(exp.n_max.unwrap_or(30), &ks, exp.nsamples, seed, jobs)?;
    let tol = exp.tolerance.unwrap_or(0.002);
    let mut table = Table::new(&["k", "u", "closed", "mc", "mc_se"]);
    let mut reports = Vec::new();
    for r in &demo.rows {
        table.push(vec![(r.k as usize).into(), r.u.into(), r.closed.into(), r.mc.into(), r.mc_se.into()]);
        reports.push(EstimatorReport::deterministic(format!("rajchman[k={}]", r.k), r.closed, demo.limit, tol, exp.nsamples));
    }
    let notes = vec![format!("limit exp(-sum(1 - cos(pi/2^j))) = {:.6}", demo.limit)];
    Ok(ExperimentOutput { reports, tables: vec![("rajchman".into(), table)], notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[model]
family = "uniform"
rate = 2.0
lo = -0.9
hi = 0.9

[functional]
label = "pair_doleans"

[experiment]
kind = "gamma"
configuration = "fixture:example1"
"#;

    fn opts(dir: &Path) -> RunOptions {
        RunOptions { seed: None, jobs: Jobs(1), out_dir: dir.to_path_buf() }
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let err = parse_config("[model]\nfamily = \"uniform\"\nrate = = 2\n").unwrap_err();
        match err {
            RunError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_config("[model]\nfamly = 1\n[experiment]\nkind='gamma'\n").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_labels_are_registry_misses() {
        let text = EXAMPLE.replace("pair_doleans", "nope");
        let dir = std::env::temp_dir().join("lentpart-runner-miss");
        assert_eq!(run(&text, Path::new("."), &opts(&dir)).unwrap_err().exit_code(), 3);
        assert_eq!(registry("colors").unwrap_err().exit_code(), 3);
    }

    #[test]
    fn example1_gamma_run() {
        let dir = std::env::temp_dir().join("lentpart-runner-example1");
        let out = run(EXAMPLE, Path::new("."), &opts(&dir)).unwrap();
        assert!(out.pass);
        assert!(out.summary.contains("[[0.290000000000, 0.260000000000], [0.260000000000, 0.250000000000]]"), "{}", out.summary);
        assert!(out.summary.contains("det = 0.004900000000"));
        let csv = fs::read_to_string(dir.join("gamma_gamma.csv")).unwrap();
        assert!(csv.starts_with("# config_sha256="));
        assert!(csv.lines().nth(1).unwrap().starts_with("sample,n_atoms"));
    }

    #[test]
    fn registries_are_sorted() {
        for name in ["models", "functionals", "gammas", "experiments", "probes"] {
            let labels: Vec<&str> = registry(name).unwrap().iter().map(|e| e.label).collect();
            let mut sorted = labels.clone();
            sorted.sort();
            assert_eq!(labels, sorted);
        }
        assert_eq!(EXPERIMENTS.len(), 6);
    }
}
