//! Named, seeded experiment recipes. Each recipe reads a JSON parameter
//! object, writes one or more tables (CSV or JSON), a `summary.json` with the
//! checked inequalities and a `manifest.json` describing every column.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::block_dyn::{
    block_transition_matrix, cheeger_check, eigenclue_verify, path_coupling_rate, spectrum, PathCouplingOptions,
};
use crate::clue::{clue_mc, GibbsSampler};
use crate::curie_weiss::{
    cw_entropy, cw_exact_clue, cw_iclue, cw_iclue_bound, cw_majority_guess_success, cw_moments, cw_relative_entropy,
    cw_threshold_k, CwTarget,
};
use crate::dac::{
    class_count, clusters, dac_bounds_exact, dac_expectation, fk_magnetization_bound, BondDistribution, BondEnsemble,
    WeightedBonds,
};
use crate::error::{Error, Result};
use crate::graphs::{sample_subset, Graph, GraphSpec, SubsetMask, SubsetSpec, TilingLayout};
use crate::ising::{swendsen_wang_step, ChainState, IsingParams, BETA_C_2D};
use crate::measures::{exact_table, majority_sign, sample_ffiid_parity_cycle, MeasureSpec, Observable};
use crate::rng::{substream, SpinRng};
use crate::stats::{batch_means, correlation, mean, mean_se, sample_variance};

/// Default wall-clock budget per recipe.
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(600);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Recipe {
    CwClue,
    CwEntropy,
    CwGuess,
    EnMoments,
    EigenclueVerify,
    DirichletCheeger,
    TiledCoupling,
    DacIdentities,
    DacBounds,
    FkBound,
    Ising2dSublattice,
    SupercritGiant,
    FfiidDemo,
}

impl Recipe {
    pub const ALL: [Recipe; 13] = [
        Recipe::CwClue,
        Recipe::CwEntropy,
        Recipe::CwGuess,
        Recipe::EnMoments,
        Recipe::EigenclueVerify,
        Recipe::DirichletCheeger,
        Recipe::TiledCoupling,
        Recipe::DacIdentities,
        Recipe::DacBounds,
        Recipe::FkBound,
        Recipe::Ising2dSublattice,
        Recipe::SupercritGiant,
        Recipe::FfiidDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::CwClue => "cw-clue",
            Recipe::CwEntropy => "cw-entropy",
            Recipe::CwGuess => "cw-guess",
            Recipe::EnMoments => "en-moments",
            Recipe::EigenclueVerify => "eigenclue-verify",
            Recipe::DirichletCheeger => "dirichlet-cheeger",
            Recipe::TiledCoupling => "tiled-coupling",
            Recipe::DacIdentities => "dac-identities",
            Recipe::DacBounds => "dac-bounds",
            Recipe::FkBound => "fk-bound",
            Recipe::Ising2dSublattice => "ising2d-sublattice",
            Recipe::SupercritGiant => "supercrit-giant",
            Recipe::FfiidDemo => "ffiid-demo",
        }
    }

    /// The statement a recipe exercises.
    pub fn anchor(self) -> &'static str {
        match self {
            Recipe::CwClue => "Curie-Weiss clue and I-clue curves; large-entropy I-clue bound",
            Recipe::CwEntropy => "Curie-Weiss entropy deficit and relative-entropy decomposition",
            Recipe::CwGuess => "Curie-Weiss majority reconstruction and the sqrt(n) threshold",
            Recipe::EnMoments => "Ellis-Newman magnetization moments; Lebowitz fourth-moment inequality",
            Recipe::EigenclueVerify => "maximal expected clue equals lambda_2 of the block dynamics",
            Recipe::DirichletCheeger => "Dirichlet form and Cheeger bounds for block dynamics",
            Recipe::TiledCoupling => "path-coupling contraction of tiled block dynamics",
            Recipe::DacIdentities => "Divide-and-Color Fourier expectation identities and class sizes",
            Recipe::DacBounds => "Divide-and-Color spectral, cluster and magnetization clue bounds",
            Recipe::FkBound => "FK cluster-size bound on the clue of the magnetization",
            Recipe::Ising2dSublattice => "critical 2D Ising: correlation of M with sublattice magnetization",
            Recipe::SupercritGiant => "supercritical giant cluster and sparse majority reconstruction",
            Recipe::FfiidDemo => "finitary-factor parity-cycle example: alternating configurations",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown recipe '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidParameter(format!("unknown format '{s}' (csv|json)"))),
        }
    }
}

/// Everything needed to run a recipe.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub recipe: Recipe,
    pub params: serde_json::Value,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub budget: Duration,
}

impl ExperimentConfig {
    pub fn new(recipe: Recipe, params: serde_json::Value, seed: u64, out: impl Into<PathBuf>) -> Self {
        Self { recipe, params, seed, out: out.into(), format: OutputFormat::Csv, budget: DEFAULT_BUDGET }
    }
}

// ---------------------------------------------------------------------------
// Tables and checks

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::F(x) => write!(f, "{x}"),
            Cell::I(x) => write!(f, "{x}"),
            Cell::S(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => f.write_str(s),
            Cell::B(b) => write!(f, "{b}"),
        }
    }
}

impl Cell {
    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::I(x) => json!(x),
            Cell::S(s) => json!(s),
            Cell::B(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}
impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(Cell::from($x)),*] };
}

#[derive(Clone, Debug, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub description: &'static str,
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &'static str, columns: &[(&'static str, &'static str)]) -> Self {
        Self {
            name,
            columns: columns.iter().map(|&(name, description)| Column { name, description }).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.iter().map(|c| c.name).collect::<Vec<_>>().join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> =
                    self.columns.iter().zip(r).map(|(c, v)| (c.name.to_string(), v.to_json())).collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }

    /// Column values as floats (integers widened).
    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c.name == name).expect("unknown column");
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::F(x) => *x,
                Cell::I(x) => *x as f64,
                Cell::B(b) => *b as u8 as f64,
                Cell::S(_) => f64::NAN,
            })
            .collect()
    }
}

/// One asserted inequality or identity.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `<=`, `>=` or `|.|<=`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, relation: "<=", passed: value <= bound }
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, relation: ">=", passed: value >= bound }
    }

    pub fn close(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self { name: name.into(), value: (value - target).abs(), bound: tol, relation: "|.|<=", passed: (value - target).abs() <= tol }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, bound: 1.0, relation: ">=", passed: ok }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Stopped at the runtime budget; outputs are partial.
    Budget,
}

/// What a recipe produces before anything is written.
#[derive(Clone, Debug)]
pub struct RecipeOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Recipe-specific values reported in the summary without a pass/fail.
    pub diagnostics: serde_json::Value,
    pub budget_exceeded: bool,
}

impl RecipeOutput {
    fn new(tables: Vec<Table>, checks: Vec<Check>) -> Self {
        Self { tables, checks, diagnostics: json!({}), budget_exceeded: false }
    }

    pub fn status(&self) -> Status {
        if self.budget_exceeded {
            Status::Budget
        } else if self.checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub recipe: String,
    pub anchor: &'static str,
    pub seed: u64,
    pub status: Status,
    pub params: serde_json::Value,
    pub checks: Vec<Check>,
    pub diagnostics: serde_json::Value,
    pub files: Vec<String>,
    pub elapsed_secs: f64,
}

struct Budget {
    start: Instant,
    limit: Duration,
}

impl Budget {
    fn exceeded(&self) -> bool {
        self.start.elapsed() > self.limit
    }
}

fn parse<T: DeserializeOwned>(params: &serde_json::Value) -> Result<T> {
    let v = if params.is_null() { json!({}) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Validate the parameters of a recipe without running it.
pub fn validate_params(recipe: Recipe, params: &serde_json::Value) -> Result<serde_json::Value> {
    fn echo<T: DeserializeOwned + Serialize>(p: &serde_json::Value) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(parse::<T>(p)?)?)
    }
    match recipe {
        Recipe::CwClue => echo::<CwClueParams>(params),
        Recipe::CwEntropy => echo::<CwEntropyParams>(params),
        Recipe::CwGuess => echo::<CwGuessParams>(params),
        Recipe::EnMoments => echo::<EnMomentsParams>(params),
        Recipe::EigenclueVerify => echo::<EigenclueParams>(params),
        Recipe::DirichletCheeger => echo::<CheegerParams>(params),
        Recipe::TiledCoupling => echo::<TiledParams>(params),
        Recipe::DacIdentities => echo::<DacIdentityParams>(params),
        Recipe::DacBounds => echo::<DacBoundParams>(params),
        Recipe::FkBound => echo::<FkBoundParams>(params),
        Recipe::Ising2dSublattice => echo::<SublatticeParams>(params),
        Recipe::SupercritGiant => echo::<GiantParams>(params),
        Recipe::FfiidDemo => echo::<FfiidParams>(params),
    }
}

/// Run a recipe in memory.
pub fn run_recipe(recipe: Recipe, params: &serde_json::Value, seed: u64, budget: Duration) -> Result<RecipeOutput> {
    let b = Budget { start: Instant::now(), limit: budget };
    match recipe {
        Recipe::CwClue => cw_clue(&parse(params)?, &b),
        Recipe::CwEntropy => cw_entropy_recipe(&parse(params)?, &b),
        Recipe::CwGuess => cw_guess(&parse(params)?, &b),
        Recipe::EnMoments => en_moments(&parse(params)?, &b),
        Recipe::EigenclueVerify => eigenclue(&parse(params)?, seed),
        Recipe::DirichletCheeger => dirichlet_cheeger(&parse(params)?, &b),
        Recipe::TiledCoupling => tiled_coupling(&parse(params)?, seed, &b),
        Recipe::DacIdentities => dac_identities(&parse(params)?, seed, &b),
        Recipe::DacBounds => dac_bounds(&parse(params)?, seed, &b),
        Recipe::FkBound => fk_bound(&parse(params)?, seed, &b),
        Recipe::Ising2dSublattice => ising2d_sublattice(&parse(params)?, seed),
        Recipe::SupercritGiant => supercrit_giant(&parse(params)?, seed),
        Recipe::FfiidDemo => ffiid_demo(&parse(params)?, seed),
    }
}

/// Run a recipe and write its outputs, `summary.json` and `manifest.json` to `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<Summary> {
    let params = validate_params(config.recipe, &config.params)?;
    let start = Instant::now();
    let output = run_recipe(config.recipe, &config.params, config.seed, config.budget)?;
    fs::create_dir_all(&config.out)?;
    let mut files = Vec::new();
    for t in &output.tables {
        let file = match config.format {
            OutputFormat::Csv => {
                let name = format!("{}.csv", t.name);
                fs::write(config.out.join(&name), t.to_csv())?;
                name
            }
            OutputFormat::Json => {
                let name = format!("{}.json", t.name);
                write_json(&config.out.join(&name), &t.to_json())?;
                name
            }
        };
        files.push(file);
    }
    let manifest = json!({
        "recipe": config.recipe.name(),
        "format": config.format,
        "tables": output.tables.iter().zip(&files).map(|(t, f)| json!({
            "file": f,
            "columns": t.columns,
        })).collect::<Vec<_>>(),
    });
    write_json(&config.out.join("manifest.json"), &manifest)?;
    let summary = Summary {
        recipe: config.recipe.name().to_string(),
        anchor: config.recipe.anchor(),
        seed: config.seed,
        status: output.status(),
        params,
        checks: output.checks,
        diagnostics: output.diagnostics,
        files,
        elapsed_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&config.out.join("summary.json"), &serde_json::to_value(&summary)?)?;
    Ok(summary)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Curie-Weiss recipes

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwClueParams {
    pub n: usize,
    pub betas: Vec<f64>,
    pub ks: Vec<usize>,
    /// Setting of the I-clue bound check.
    pub iclue_n: usize,
    pub iclue_beta: f64,
    pub iclue_k_max: usize,
}

impl Default for CwClueParams {
    fn default() -> Self {
        Self {
            n: 2000,
            betas: vec![0.5, 1.0, 1.5],
            ks: vec![10, 20, 50, 100, 200, 500],
            iclue_n: 1000,
            iclue_beta: 0.5,
            iclue_k_max: 100,
        }
    }
}

fn cw_clue(p: &CwClueParams, budget: &Budget) -> Result<RecipeOutput> {
    let mut curves = Table::new(
        "clue",
        &[
            ("beta", "inverse temperature"),
            ("n", "number of spins"),
            ("k", "number of observed spins"),
            ("clue_m", "exact clue of the magnetization"),
            ("clue_maj", "exact clue of the majority"),
            ("iclue_maj", "mutual-information clue of the majority"),
        ],
    );
    let mut checks = Vec::new();
    let mut out_of_time = false;
    for &beta in &p.betas {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let rows: Vec<(usize, f64, f64, f64)> = p
            .ks
            .par_iter()
            .map(|&k| -> Result<_> {
                Ok((
                    k,
                    cw_exact_clue(p.n, beta, k, CwTarget::M)?,
                    cw_exact_clue(p.n, beta, k, CwTarget::Maj)?,
                    cw_iclue(p.n, beta, k)?,
                ))
            })
            .collect::<Result<_>>()?;
        let monotone = rows.windows(2).all(|w| w[0].0 > w[1].0 || w[1].2 >= w[0].2 - 1e-12);
        checks.push(Check::flag(format!("clue_maj_monotone_in_k[beta={beta}]"), monotone));
        for (k, cm, cmaj, ic) in rows {
            curves.push(row![beta, p.n, k, cm, cmaj, ic]);
        }
    }
    let mut ib = Table::new(
        "iclue_bound",
        &[
            ("k", "number of observed spins"),
            ("iclue_maj", "I(Maj; observed) / H(Maj)"),
            ("bound", "(k/n)(1 + (n - H)/H(Maj))"),
        ],
    );
    let rows: Vec<(usize, f64, f64)> = (1..=p.iclue_k_max.min(p.iclue_n))
        .into_par_iter()
        .map(|k| Ok((k, cw_iclue(p.iclue_n, p.iclue_beta, k)?, cw_iclue_bound(p.iclue_n, p.iclue_beta, k)?)))
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|&(_, v, b)| v - b).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::le("iclue_minus_bound_max", worst, 0.0));
    for (k, v, b) in rows {
        ib.push(row![k, v, b]);
    }
    let mut out = RecipeOutput::new(vec![curves, ib], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwEntropyParams {
    pub betas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Largest allowed deficit (bits) for `beta < 1`.
    pub subcritical_deficit_max: f64,
    /// Allowed relative change of `deficit/√n` between doublings at `beta = 1`.
    pub critical_tolerance: f64,
}

impl Default for CwEntropyParams {
    fn default() -> Self {
        Self {
            betas: vec![0.5, 1.0],
            ns: vec![625, 1250, 2500, 5000, 10000],
            subcritical_deficit_max: 0.9,
            critical_tolerance: 0.1,
        }
    }
}

fn cw_entropy_recipe(p: &CwEntropyParams, budget: &Budget) -> Result<RecipeOutput> {
    let mut t = Table::new(
        "entropy",
        &[
            ("beta", "inverse temperature"),
            ("n", "number of spins"),
            ("h_bits", "entropy of the configuration (bits)"),
            ("deficit", "n - H"),
            ("d_bits", "relative entropy to the uniform measure (bits)"),
            ("bound_bits", "(log2 e)(beta/2) E[n M^2]"),
            ("gap_bits", "log2(Z_beta / Z_0)"),
            ("deficit_over_sqrt_n", "(n - H)/sqrt(n)"),
        ],
    );
    let mut checks = Vec::new();
    let mut out_of_time = false;
    for &beta in &p.betas {
        let mut scaled = Vec::new();
        for &n in &p.ns {
            if budget.exceeded() {
                out_of_time = true;
                break;
            }
            let e = cw_entropy(n, beta)?;
            let d = cw_relative_entropy(n, beta)?;
            let tag = format!("[beta={beta},n={n}]");
            checks.push(Check::close(format!("d_equals_deficit{tag}"), d.d_bits, e.deficit, 1e-9));
            checks.push(Check::close(format!("decomposition{tag}"), d.bound_bits - d.gap_bits, d.d_bits, 1e-9));
            checks.push(Check::ge(format!("gap_nonnegative{tag}"), d.gap_bits, 0.0));
            if beta < 1.0 {
                checks.push(Check::le(format!("deficit{tag}"), e.deficit, p.subcritical_deficit_max));
            }
            let s = e.deficit / (n as f64).sqrt();
            scaled.push(s);
            t.push(row![beta, n, e.h_bits, e.deficit, d.d_bits, d.bound_bits, d.gap_bits, s]);
        }
        if beta == 1.0 {
            let worst = scaled.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).fold(0.0, f64::max);
            checks.push(Check::le("critical_deficit_scaling_change", worst, p.critical_tolerance));
        }
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwGuessParams {
    pub n: usize,
    pub beta: f64,
    pub ks: Vec<usize>,
    pub clue_k: usize,
    pub clue_level: f64,
    pub guess_k: usize,
    pub guess_level: f64,
    /// Threshold scan: smallest k with clue(Maj|k) ≥ `threshold_level` at `threshold_beta`.
    pub threshold_beta: f64,
    pub threshold_ns: Vec<usize>,
    pub threshold_level: f64,
    pub threshold_tolerance: f64,
}

impl Default for CwGuessParams {
    fn default() -> Self {
        Self {
            n: 2000,
            beta: 1.5,
            ks: vec![1, 5, 10, 20, 50, 100, 200],
            clue_k: 200,
            clue_level: 0.99,
            guess_k: 50,
            guess_level: 0.95,
            threshold_beta: 1.0,
            threshold_ns: vec![1000, 10000],
            threshold_level: 0.5,
            threshold_tolerance: 0.25,
        }
    }
}

fn cw_guess(p: &CwGuessParams, budget: &Budget) -> Result<RecipeOutput> {
    let mut t = Table::new(
        "guess",
        &[
            ("k", "number of observed spins"),
            ("clue_maj", "exact clue of the majority"),
            ("guess_success", "P[majority of observed spins = overall majority]"),
        ],
    );
    let mut ks = p.ks.clone();
    for k in [p.clue_k, p.guess_k] {
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    ks.sort_unstable();
    let rows: Vec<(usize, f64, f64)> = ks
        .par_iter()
        .map(|&k| Ok((k, cw_exact_clue(p.n, p.beta, k, CwTarget::Maj)?, cw_majority_guess_success(p.n, p.beta, k)?)))
        .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for &(k, c, g) in &rows {
        if k == p.clue_k {
            checks.push(Check::ge(format!("clue_maj[k={k}]"), c, p.clue_level));
        }
        if k == p.guess_k {
            checks.push(Check::ge(format!("guess_success[k={k}]"), g, p.guess_level));
        }
        t.push(row![k, c, g]);
    }
    let mut th = Table::new(
        "threshold",
        &[
            ("n", "number of spins"),
            ("k_star", "smallest k with clue(Maj|k) at the level"),
            ("ratio", "k_star / sqrt(n)"),
        ],
    );
    let mut ratios = Vec::new();
    let mut out_of_time = false;
    for &n in &p.threshold_ns {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let k = cw_threshold_k(n, p.threshold_beta, CwTarget::Maj, p.threshold_level)?
            .ok_or_else(|| Error::Degenerate(format!("level {} never reached at n = {n}", p.threshold_level)))?;
        let r = k as f64 / (n as f64).sqrt();
        ratios.push(r);
        th.push(row![n, k, r]);
    }
    if ratios.len() >= 2 {
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        checks.push(Check::le("threshold_ratio_spread", hi / lo - 1.0, p.threshold_tolerance));
    }
    let mut out = RecipeOutput::new(vec![t, th], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnMomentsParams {
    /// `(n, beta)` pairs with `beta < 1` where `E[nM²]` is compared with `1/(1 − beta)`.
    pub subcritical: Vec<(usize, f64)>,
    pub subcritical_tolerance: f64,
    /// Sizes at `beta = 1` for the `E[√n M²]` stability check.
    pub critical_ns: Vec<usize>,
    pub critical_tolerance: f64,
    pub lebowitz_ns: Vec<usize>,
    pub lebowitz_betas: Vec<f64>,
}

impl Default for EnMomentsParams {
    fn default() -> Self {
        Self {
            subcritical: vec![(2000, 0.5)],
            subcritical_tolerance: 0.2,
            critical_ns: vec![4000, 8000],
            critical_tolerance: 0.1,
            lebowitz_ns: vec![10, 100, 1000, 4000],
            lebowitz_betas: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

fn en_moments(p: &EnMomentsParams, budget: &Budget) -> Result<RecipeOutput> {
    let mut t = Table::new(
        "moments",
        &[
            ("n", "number of spins"),
            ("beta", "inverse temperature"),
            ("m1", "E[S/sqrt(n)]"),
            ("e_nm2", "E[n M^2]"),
            ("m4", "E[(S/sqrt(n))^4]"),
            ("e_sqrtn_m2", "E[sqrt(n) M^2]"),
            ("lebowitz_ratio", "E[S^4] / (3 E[S^2]^2)"),
        ],
    );
    let mut checks = Vec::new();
    let mut cases: Vec<(usize, f64)> = p.subcritical.clone();
    cases.extend(p.critical_ns.iter().map(|&n| (n, 1.0)));
    for &n in &p.lebowitz_ns {
        cases.extend(p.lebowitz_betas.iter().map(|&b| (n, b)));
    }
    let mut out_of_time = false;
    let mut moments = Vec::new();
    for &(n, beta) in &cases {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let m = cw_moments(n, beta)?;
        t.push(row![n, beta, m.m1, m.e_nm2, m.m4, m.e_sqrtn_m2, m.lebowitz_ratio]);
        moments.push((n, beta, m));
        if beta <= 1.0 {
            checks.push(Check::le(format!("lebowitz[n={n},beta={beta}]"), m.lebowitz_ratio, 1.0 + 1e-12));
        }
    }
    for &(n, beta) in &p.subcritical {
        if let Some((_, _, m)) = moments.iter().find(|(a, b, _)| *a == n && *b == beta) {
            checks.push(Check::close(format!("e_nm2[n={n},beta={beta}]"), m.e_nm2, 1.0 / (1.0 - beta), p.subcritical_tolerance));
        }
    }
    let crit: Vec<f64> = p
        .critical_ns
        .iter()
        .filter_map(|&n| moments.iter().find(|(a, b, _)| *a == n && *b == 1.0).map(|(_, _, m)| m.e_sqrtn_m2))
        .collect();
    if crit.len() >= 2 {
        let worst = crit.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::le("critical_sqrtn_m2_change", worst, p.critical_tolerance));
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Block dynamics recipes

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenclueParams {
    pub graph: GraphSpec,
    pub measure: MeasureSpec,
    /// Shorthand for a zero-field Ising measure; overrides `measure`.
    pub beta: Option<f64>,
    pub spec: SubsetSpec,
    pub trials: usize,
}

impl Default for EigenclueParams {
    fn default() -> Self {
        Self {
            graph: GraphSpec::Cycle { n: 6 },
            measure: MeasureSpec::ising(0.4),
            beta: None,
            spec: SubsetSpec::uniform_k(2),
            trials: 100,
        }
    }
}

fn measure_or_beta(measure: &MeasureSpec, beta: Option<f64>) -> MeasureSpec {
    beta.map_or_else(|| measure.clone(), MeasureSpec::ising)
}

fn eigenclue(p: &EigenclueParams, seed: u64) -> Result<RecipeOutput> {
    let graph = Graph::build(p.graph.clone())?;
    let table = exact_table(&measure_or_beta(&p.measure, p.beta), &graph)?;
    let mut rng = substream(seed, 31, 0);
    let r = eigenclue_verify(&table, &p.spec, &graph, p.trials, &mut rng)?;
    let mut t = Table::new(
        "eigenclue",
        &[
            ("lambda2", "second largest eigenvalue of the block dynamics"),
            ("f2_clue", "expected clue of the lambda2 eigenfunction"),
            ("residual", "max |lambda2 - expected clue| over the eigenspace basis"),
            ("max_trial_clue", "largest expected clue among random functions"),
            ("trials", "number of random functions"),
            ("eigenspace_dim", "multiplicity of lambda2"),
        ],
    );
    t.push(row![r.lambda2, r.f2_clue, r.residual, r.max_trial_clue, r.trials, r.eigenspace_dim]);
    let checks = vec![
        Check::le("eigenfunction_residual", r.residual, 1e-8),
        Check::le("random_clue_below_lambda2", r.max_trial_clue, r.lambda2 + 1e-9),
    ];
    Ok(RecipeOutput::new(vec![t], checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheegerParams {
    pub graph: GraphSpec,
    pub measure: MeasureSpec,
    /// Shorthand for a zero-field Ising measure; overrides `measure`.
    pub beta: Option<f64>,
    pub specs: Vec<SubsetSpec>,
}

impl Default for CheegerParams {
    fn default() -> Self {
        Self {
            graph: GraphSpec::Cycle { n: 6 },
            measure: MeasureSpec::ising(0.4),
            beta: None,
            specs: vec![SubsetSpec::uniform_k(1), SubsetSpec::uniform_k(2), SubsetSpec::bernoulli(0.3)],
        }
    }
}

fn dirichlet_cheeger(p: &CheegerParams, budget: &Budget) -> Result<RecipeOutput> {
    let graph = Graph::build(p.graph.clone())?;
    let table = exact_table(&measure_or_beta(&p.measure, p.beta), &graph)?;
    let mut t = Table::new(
        "cheeger",
        &[
            ("spec", "subset law (JSON)"),
            ("lambda2", "second largest eigenvalue"),
            ("lambda2_dirichlet", "1 - E(f2)/Var(f2)"),
            ("gap", "spectral gap"),
            ("phi", "bottleneck ratio of the best event found"),
            ("method", "exhaustive or sweep"),
            ("phi2_over_2", "lower Cheeger bound on the gap"),
            ("two_phi", "upper Cheeger bound on the gap"),
        ],
    );
    let mut checks = Vec::new();
    let mut out_of_time = false;
    for spec in &p.specs {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let label = serde_json::to_string(spec)?;
        let bt = block_transition_matrix(&table, spec, &graph)?;
        let s = spectrum(&bt)?;
        let c = cheeger_check(&bt)?;
        checks.push(Check::close(format!("dirichlet_lambda2{label}"), s.lambda2_dirichlet, s.lambda2, 1e-9));
        checks.push(Check::le(format!("cheeger_lower{label}"), c.phi * c.phi / 2.0, c.gap + 1e-12));
        checks.push(Check::le(format!("cheeger_upper{label}"), c.gap, 2.0 * c.phi + 1e-12));
        t.push(row![label, s.lambda2, s.lambda2_dirichlet, s.gap, c.phi, c.method, c.phi * c.phi / 2.0, 2.0 * c.phi]);
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiledParams {
    pub dim: usize,
    pub side: usize,
    pub betas: Vec<f64>,
    pub ls: Vec<usize>,
    pub trials: usize,
    pub block_sweeps: usize,
    pub layout: TilingLayout,
}

impl Default for TiledParams {
    fn default() -> Self {
        Self {
            dim: 2,
            side: 60,
            betas: vec![0.0, 0.3],
            ls: vec![5, 10, 15],
            trials: 2000,
            block_sweeps: 200,
            layout: TilingLayout::FullLattice,
        }
    }
}

fn tiled_coupling(p: &TiledParams, seed: u64, budget: &Budget) -> Result<RecipeOutput> {
    let graph = Graph::torus(p.dim, p.side)?;
    let opts = PathCouplingOptions { block_sweeps: p.block_sweeps, layout: p.layout, ..Default::default() };
    let mut t = Table::new(
        "coupling",
        &[
            ("beta", "inverse temperature"),
            ("L", "side of the resampled cubes"),
            ("eta1_mean", "mean disagreements after one step"),
            ("eta1_se", "standard error"),
            ("trials", "number of coupled steps"),
            ("delta", "revealment 1 - (L/(L+3))^d"),
        ],
    );
    let mut checks = Vec::new();
    let mut exponents = serde_json::Map::new();
    let mut out_of_time = false;
    for &beta in &p.betas {
        let mut est = Vec::new();
        for &l in &p.ls {
            if budget.exceeded() {
                out_of_time = true;
                break;
            }
            let e = path_coupling_rate(&graph, beta, l, p.trials, seed, &opts)?;
            t.push(row![beta, l, e.eta1_mean, e.eta1_se, e.trials, e.delta]);
            if beta == 0.0 {
                checks.push(Check::le(
                    format!("beta0_matches_delta[L={l}]"),
                    (e.eta1_mean - e.delta).abs(),
                    3.0 * e.eta1_se.max(1e-12),
                ));
            }
            est.push(e);
        }
        if beta > 0.0 {
            for w in est.windows(2) {
                let margin = w[0].eta1_mean - w[1].eta1_mean;
                let se = (w[0].eta1_se.powi(2) + w[1].eta1_se.powi(2)).sqrt();
                checks.push(Check::ge(format!("decreasing[beta={beta},L={}->{}]", w[0].l, w[1].l), margin, 2.0 * se));
            }
            // least-squares slope of log eta1 against log L, reported only
            let pts: Vec<(f64, f64)> =
                est.iter().filter(|e| e.eta1_mean > 0.0).map(|e| ((e.l as f64).ln(), e.eta1_mean.ln())).collect();
            if pts.len() >= 2 {
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                exponents.insert(format!("beta={beta}"), json!(sxy / sxx));
            }
        }
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.diagnostics = json!({ "fitted_log_log_slope": exponents });
    out.budget_exceeded = out_of_time;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Divide-and-Color recipes

/// Random small instance: graph, bond law, two random functions.
struct DacInstance {
    graph: Graph,
    bonds: BondDistribution,
    f: Vec<f64>,
    g: Vec<f64>,
}

fn random_instance(rng: &mut SpinRng, n_min: usize, n_max: usize, max_edges: usize) -> Result<DacInstance> {
    let n = rng.gen_range(n_min..=n_max);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if edges.len() < max_edges && rng.gen::<f64>() < 0.5 {
                edges.push((u, v));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let m = edges.len();
    let graph = Graph::custom(n, edges)?;
    let bonds = match rng.gen_range(0..3) {
        0 => BondDistribution::Bernoulli { p: rng.gen_range(0.1..0.9) },
        1 => BondDistribution::Fk { beta: rng.gen_range(0.1..1.0), j: 1.0 },
        _ => {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let configs = raw
                .iter()
                .map(|w| WeightedBonds { edges: (0..m).filter(|_| rng.gen::<bool>()).collect(), prob: w / total })
                .collect();
            BondDistribution::Explicit { configs }
        }
    };
    let f = (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(DacInstance { graph, bonds, f, g })
}

/// Size of the span of the edge incidence vectors, by brute-force enumeration.
fn span_size(graph: &Graph, edges: u64) -> usize {
    let vecs: Vec<u64> = (0..graph.n_edges()).filter(|e| edges >> e & 1 == 1).map(|e| {
        let (u, v) = graph.edges()[e];
        (1u64 << u) | (1u64 << v)
    }).collect();
    let mut seen = std::collections::BTreeSet::new();
    for c in 0..1u64 << vecs.len() {
        seen.insert(vecs.iter().enumerate().filter(|(i, _)| c >> i & 1 == 1).fold(0u64, |acc, (_, v)| acc ^ v));
    }
    seen.len()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacIdentityParams {
    pub instances: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub max_edges: usize,
}

impl Default for DacIdentityParams {
    fn default() -> Self {
        Self { instances: 30, n_min: 3, n_max: 6, max_edges: 9 }
    }
}

fn dac_identities(p: &DacIdentityParams, seed: u64, budget: &Budget) -> Result<RecipeOutput> {
    if p.n_min < 2 || p.n_max > 8 || p.n_min > p.n_max || p.max_edges > 12 {
        return Err(Error::InvalidParameter("need 2 <= n_min <= n_max <= 8 and max_edges <= 12".into()));
    }
    let mut t = Table::new(
        "identities",
        &[
            ("instance", "instance index"),
            ("n", "vertices"),
            ("edges", "edges"),
            ("e_f_fourier", "E_nu of the empty-class coefficient"),
            ("e_f_direct", "E[f] under the spin table"),
            ("e_fg_fourier", "E_nu of the sum over classes of f-hat g-hat"),
            ("e_fg_direct", "E[fg] under the spin table"),
            ("class_count_errors", "bond masks with |<N>| != 2^(n-k)"),
        ],
    );
    let mut checks = Vec::new();
    let mut out_of_time = false;
    for i in 0..p.instances {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let mut rng = substream(seed, 41, i as u64);
        let inst = random_instance(&mut rng, p.n_min, p.n_max, p.max_edges)?;
        let n = inst.graph.n_vertices();
        let ens = BondEnsemble::exact(&inst.bonds, &inst.graph, 20)?;
        let e = dac_expectation(&inst.f, &inst.g, &ens)?;
        let table = exact_table(&MeasureSpec::Dac { bonds: inst.bonds.clone() }, &inst.graph)?;
        let fg: Vec<f64> = inst.f.iter().zip(&inst.g).map(|(a, b)| a * b).collect();
        let (ef, efg) = (table.expect(&inst.f), table.expect(&fg));
        let errors = (0..1u64 << inst.graph.n_edges())
            .filter(|&b| span_size(&inst.graph, b) as u128 != class_count(&clusters(&inst.graph, b)))
            .count();
        checks.push(Check::close(format!("mean_identity[{i}]"), e.e_f, ef, 1e-9));
        checks.push(Check::close(format!("product_identity[{i}]"), e.e_fg, efg, 1e-9));
        checks.push(Check::le(format!("class_count[{i}]"), errors as f64, 0.0));
        t.push(row![i, n, inst.graph.n_edges(), e.e_f, ef, e.e_fg, efg, errors]);
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacBoundParams {
    pub instances: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub max_edges: usize,
}

impl Default for DacBoundParams {
    fn default() -> Self {
        Self { instances: 50, n_min: 3, n_max: 6, max_edges: 9 }
    }
}

fn dac_bounds(p: &DacBoundParams, seed: u64, budget: &Budget) -> Result<RecipeOutput> {
    if p.n_min < 2 || p.n_max > 8 || p.n_min > p.n_max {
        return Err(Error::InvalidParameter("need 2 <= n_min <= n_max <= 8".into()));
    }
    let mut t = Table::new(
        "bounds",
        &[
            ("instance", "instance index"),
            ("function", "random or magnetization"),
            ("n", "vertices"),
            ("spec", "subset law (JSON)"),
            ("exact_clue", "exact expected clue"),
            ("spectral_bound", "P[spectral sample class fits inside U]"),
            ("max_cluster_bound", "delta E[max cluster] + clue(f|N)"),
            ("cluster_ratio_bound", "delta sum E|C_v|^2 / sum E|C_v|"),
            ("singleton_sum", "sum_u P[u in U] E[f-hat([u])^2] / Var(f)"),
            ("clue_given_bonds", "Var(E[f|N]) / Var(f)"),
            ("smallest_odd_cluster", "diagnostic: delta E[min odd cluster] + clue(f|N), not asserted"),
        ],
    );
    let mut checks = Vec::new();
    let mut out_of_time = false;
    for i in 0..p.instances {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let mut rng = substream(seed, 42, i as u64);
        let inst = random_instance(&mut rng, p.n_min, p.n_max, p.max_edges)?;
        let n = inst.graph.n_vertices();
        let k = rng.gen_range(1..n);
        let spec = if rng.gen::<bool>() { SubsetSpec::uniform_k(k) } else { SubsetSpec::bernoulli(rng.gen_range(0.1..0.6)) };
        let label = serde_json::to_string(&spec)?;
        let r = dac_bounds_exact(&inst.f, &inst.bonds, &spec, &inst.graph)?;
        let exact = r.exact_clue.unwrap_or(f64::NAN);
        checks.push(Check::le(format!("exact_below_spectral[{i}]"), exact, r.spectral_bound + 1e-9));
        checks.push(Check::le(format!("spectral_below_max_cluster[{i}]"), r.spectral_bound, r.max_cluster_bound + 1e-9));
        t.push(row![i, "random", n, label.clone(), exact, r.spectral_bound, r.max_cluster_bound, r.cluster_ratio_bound, r.singleton_sum, r.clue_given_bonds, r.smallest_odd_cluster_bound]);

        let uk = SubsetSpec::uniform_k(k);
        let m = Observable::Magnetization.tabulate(n)?;
        let rm = dac_bounds_exact(&m, &inst.bonds, &uk, &inst.graph)?;
        let exact_m = rm.exact_clue.unwrap_or(f64::NAN);
        checks.push(Check::close(format!("magnetization_identity[{i}]"), rm.singleton_sum, rm.cluster_ratio_bound, 1e-9));
        checks.push(Check::le(format!("magnetization_exact_below_spectral[{i}]"), exact_m, rm.spectral_bound + 1e-9));
        checks.push(Check::le(format!("magnetization_spectral_below_ratio[{i}]"), rm.spectral_bound, rm.cluster_ratio_bound + 1e-9));
        checks.push(Check::le(format!("odd_function_bond_clue[{i}]"), rm.clue_given_bonds, 1e-12));
        let label = serde_json::to_string(&uk)?;
        t.push(row![i, "magnetization", n, label, exact_m, rm.spectral_bound, rm.max_cluster_bound, rm.cluster_ratio_bound, rm.singleton_sum, rm.clue_given_bonds, rm.smallest_odd_cluster_bound]);
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FkBoundParams {
    pub side: usize,
    pub betas: Vec<f64>,
    pub k: usize,
    pub fk_samples: usize,
    pub outer: usize,
    pub inner: usize,
}

impl Default for FkBoundParams {
    fn default() -> Self {
        Self { side: 8, betas: vec![0.3, BETA_C_2D, 0.6], k: 4, fk_samples: 1000, outer: 400, inner: 10 }
    }
}

fn fk_bound(p: &FkBoundParams, seed: u64, budget: &Budget) -> Result<RecipeOutput> {
    let graph = Graph::torus(2, p.side)?;
    let spec = SubsetSpec::uniform_k(p.k);
    let mut t = Table::new(
        "fk_bound",
        &[
            ("beta", "inverse temperature"),
            ("mc_clue", "Monte Carlo expected clue of M"),
            ("mc_se", "standard error"),
            ("ratio_bound", "delta sum E|C_v|^2 / sum E|C_v|"),
            ("ratio_bound_se", "standard error"),
            ("max_bound", "delta E[max |C_v|]"),
            ("max_bound_se", "standard error"),
        ],
    );
    let mut checks = Vec::new();
    let mut out_of_time = false;
    for (i, &beta) in p.betas.iter().enumerate() {
        if budget.exceeded() {
            out_of_time = true;
            break;
        }
        let params = IsingParams::new(beta);
        let sampler = GibbsSampler::new(&graph, params);
        let est = clue_mc(&sampler, &Observable::Magnetization, &spec, &graph, p.outer, p.inner, seed ^ (i as u64) << 48)?;
        let mut rng = substream(seed, 51, i as u64);
        let b = fk_magnetization_bound(&graph, &params, &spec, p.fk_samples, &mut rng)?;
        let se = (est.se.powi(2) + b.ratio_bound_se.powi(2)).sqrt();
        checks.push(Check::le(format!("clue_below_ratio_bound[beta={beta}]"), est.value, b.ratio_bound + 3.0 * se));
        t.push(row![beta, est.value, est.se, b.ratio_bound, b.ratio_bound_se, b.max_bound, b.max_bound_se]);
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.budget_exceeded = out_of_time;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lattice Monte Carlo recipes

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SublatticeParams {
    pub side: usize,
    pub beta: f64,
    /// `false` for the open box, `true` for the torus.
    pub periodic: bool,
    pub meshes: Vec<usize>,
    pub burn_in: usize,
    /// Recorded Swendsen-Wang steps.
    #[serde(alias = "sweeps")]
    pub steps: usize,
    pub batches: usize,
    pub min_ess: f64,
    pub min_corr: f64,
}

impl Default for SublatticeParams {
    fn default() -> Self {
        Self {
            side: 64,
            beta: BETA_C_2D,
            periodic: false,
            meshes: vec![2, 4, 8, 16],
            burn_in: 500,
            steps: 4000,
            batches: 20,
            min_ess: 200.0,
            min_corr: 0.9,
        }
    }
}

fn ising2d_sublattice(p: &SublatticeParams, seed: u64) -> Result<RecipeOutput> {
    if p.meshes.is_empty() || p.meshes.iter().any(|&s| s == 0 || s > p.side) {
        return Err(Error::InvalidParameter("meshes must lie in 1..=side".into()));
    }
    if p.batches < 2 || p.steps < 2 * p.batches {
        return Err(Error::InvalidParameter("need batches >= 2 and steps >= 2 * batches".into()));
    }
    let graph = if p.periodic { Graph::torus(2, p.side)? } else { Graph::lattice_box(2, p.side)? };
    let params = IsingParams::new(p.beta);
    let n = graph.n_vertices();
    let subs: Vec<Vec<usize>> = p
        .meshes
        .iter()
        .map(|&s| (0..n).filter(|&v| graph.coords(v).unwrap().iter().all(|c| c % s == 0)).collect())
        .collect();
    let mut chain = ChainState::random(n, seed, 61);
    for _ in 0..p.burn_in {
        swendsen_wang_step(&mut chain, &graph, &params)?;
    }
    let mut m = Vec::with_capacity(p.steps);
    let mut mh = vec![Vec::with_capacity(p.steps); subs.len()];
    for _ in 0..p.steps {
        swendsen_wang_step(&mut chain, &graph, &params)?;
        m.push(chain.config.total() as f64 / n as f64);
        for (series, sub) in mh.iter_mut().zip(&subs) {
            let s: i64 = sub.iter().map(|&v| chain.config.get(v) as i64).sum();
            series.push(s as f64 / sub.len() as f64);
        }
    }
    let m2: Vec<f64> = m.iter().map(|x| x * x).collect();
    let (_, _, ess) = batch_means(&m2, p.batches);
    let mut t = Table::new(
        "sublattice",
        &[
            ("mesh", "sublattice spacing"),
            ("sites", "number of sublattice sites"),
            ("corr", "Corr(M, M_H)"),
            ("corr_se", "batch standard error"),
        ],
    );
    let len = p.steps / p.batches;
    let mut checks = vec![Check::ge("effective_samples", ess, p.min_ess)];
    let mut prev: Option<(usize, f64, f64)> = None;
    for ((&s, sub), series) in p.meshes.iter().zip(&subs).zip(&mh) {
        let c = correlation(&m, series);
        let per_batch: Vec<f64> =
            (0..p.batches).map(|b| correlation(&m[b * len..(b + 1) * len], &series[b * len..(b + 1) * len])).collect();
        let se = (sample_variance(&per_batch) / p.batches as f64).sqrt();
        if s == p.meshes[0] {
            checks.push(Check::ge(format!("corr[mesh={s}]"), c, p.min_corr));
        }
        if let Some((ps, pc, pse)) = prev {
            checks.push(Check::le(format!("nonincreasing[mesh={ps}->{s}]"), c - pc, 2.0 * (se * se + pse * pse).sqrt()));
        }
        prev = Some((s, c, se));
        t.push(row![s, sub.len(), c, se]);
    }
    let mut out = RecipeOutput::new(vec![t], checks);
    out.diagnostics = json!({ "ess_m2": ess, "mean_m2": mean(&m2) });
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GiantParams {
    pub side: usize,
    pub beta: f64,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub reveal_p: f64,
    pub giant_fraction: f64,
    pub giant_level: f64,
    pub guess_level: f64,
    pub pz_factor: f64,
    pub pz_level: f64,
}

impl Default for GiantParams {
    fn default() -> Self {
        Self {
            side: 16,
            beta: 0.6,
            burn_in: 200,
            samples: 1000,
            thin: 2,
            reveal_p: 0.05,
            giant_fraction: 0.3,
            giant_level: 0.9,
            guess_level: 0.8,
            pz_factor: 0.3,
            pz_level: 0.2,
        }
    }
}

fn supercrit_giant(p: &GiantParams, seed: u64) -> Result<RecipeOutput> {
    let graph = Graph::torus(2, p.side)?;
    let params = IsingParams::new(p.beta);
    let n = graph.n_vertices();
    let reveal = SubsetSpec::bernoulli(p.reveal_p);
    reveal.validate(&graph)?;
    let mut chain = ChainState::random(n, seed, 71);
    for _ in 0..p.burn_in {
        swendsen_wang_step(&mut chain, &graph, &params)?;
    }
    let mut t = Table::new(
        "giant",
        &[
            ("sample", "sample index"),
            ("largest", "largest FK cluster"),
            ("second", "second largest FK cluster"),
            ("total", "sum of spins"),
            ("revealed", "size of the revealed set"),
            ("guess_correct", "majority of revealed spins equals overall majority"),
        ],
    );
    let mut giant = 0usize;
    let mut correct = 0usize;
    let mut totals = Vec::with_capacity(p.samples);
    for i in 0..p.samples {
        let mut bonds = swendsen_wang_step(&mut chain, &graph, &params)?;
        for _ in 1..p.thin.max(1) {
            bonds = swendsen_wang_step(&mut chain, &graph, &params)?;
        }
        let mut sizes = bonds.cluster_sizes().to_vec();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let (largest, second) = (sizes[0], sizes.get(1).copied().unwrap_or(0));
        let mut rng = substream(seed, 72, i as u64);
        let u: SubsetMask = sample_subset(&reveal, &graph, &mut rng)?;
        let revealed: i64 = u.iter().map(|v| chain.config.get(v) as i64).sum();
        let total = chain.config.total();
        let ok = majority_sign(revealed) == majority_sign(total);
        giant += (largest as f64 >= p.giant_fraction * n as f64) as usize;
        correct += ok as usize;
        totals.push(total as f64);
        t.push(row![i, largest, second, total, u.count(), ok]);
    }
    let freq_giant = giant as f64 / p.samples as f64;
    let freq_guess = correct as f64 / p.samples as f64;
    let rms = (totals.iter().map(|s| s * s).sum::<f64>() / totals.len() as f64).sqrt();
    let pz = totals.iter().filter(|s| s.abs() >= p.pz_factor * rms).count() as f64 / totals.len() as f64;
    let checks = vec![
        Check::ge("giant_frequency", freq_giant, p.giant_level),
        Check::ge("guess_frequency", freq_guess, p.guess_level),
        Check::ge("paley_zygmund_frequency", pz, p.pz_level),
    ];
    let mut out = RecipeOutput::new(vec![t], checks);
    let largest_fraction = mean(&out.tables[0].column("largest")) / n as f64;
    out.diagnostics = json!({ "rms_total": rms, "mean_largest_fraction": largest_fraction });
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FfiidParams {
    /// The cycle has `2 n_half` vertices.
    pub n_half: usize,
    pub samples: usize,
}

impl Default for FfiidParams {
    fn default() -> Self {
        Self { n_half: 3, samples: 20000 }
    }
}

fn ffiid_demo(p: &FfiidParams, seed: u64) -> Result<RecipeOutput> {
    let n = 2 * p.n_half;
    if p.n_half < 2 || p.samples < 2 {
        return Err(Error::InvalidParameter("need n_half >= 2 and samples >= 2".into()));
    }
    let rows: Vec<(bool, bool, i8)> = (0..p.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, 81, i as u64);
            let c = sample_ffiid_parity_cycle(p.n_half, &mut rng)?;
            let s = c.spins();
            let alternating = (0..n).all(|v| s[v] != s[(v + 1) % n]);
            let pattern = s[0] != s[1] && s[1] != s[2];
            Ok((alternating, pattern, s[0]))
        })
        .collect::<Result<_>>()?;
    let alt: Vec<f64> = rows.iter().map(|r| r.0 as u8 as f64).collect();
    let (freq, se) = mean_se(&alt);
    let expected = 0.5f64.powi(n as i32 - 1);
    let iff = rows.iter().all(|r| r.0 == r.1);
    let plus: Vec<f64> = rows.iter().map(|r| (r.2 > 0) as u8 as f64).collect();
    let (plus_freq, plus_se) = mean_se(&plus);
    let mut t = Table::new(
        "ffiid",
        &[
            ("n", "cycle length"),
            ("samples", "number of samples"),
            ("alternating_freq", "fraction of alternating configurations"),
            ("alternating_se", "standard error"),
            ("alternating_expected", "2^-(n-1)"),
            ("plus_freq", "fraction with spin 0 = +1"),
        ],
    );
    t.push(row![n, p.samples, freq, se, expected, plus_freq]);
    let binom_se = (expected * (1.0 - expected) / p.samples as f64).sqrt();
    let checks = vec![
        Check::flag("pattern_iff_alternating", iff),
        Check::le("alternating_frequency", (freq - expected).abs(), 4.0 * binom_se),
        Check::le("plus_marginal", (plus_freq - 0.5).abs(), 4.0 * plus_se.max(0.5 / (p.samples as f64).sqrt())),
    ];
    Ok(RecipeOutput::new(vec![t], checks))
}
