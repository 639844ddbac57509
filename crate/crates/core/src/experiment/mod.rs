//! Batch experiments: sample designs from a benchmark model, fit every
//! method for every weight setting, score the fits on a validation sample
//! and collect long-format records plus boxplot summaries.

mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{model_by_name, reference_sobol, BenchmarkModel};
use crate::chaos::{total_degree_set, ChaosBasis, ChaosExpansion};
use crate::error::{Error, Result};
use crate::gsa::gsa_report;
use crate::measures::MeasureSpec;
use crate::regression::{fit_with, DesignData, Method, DEFAULT_MAX_TERMS};
use crate::seeds;
use crate::spectral::{build_basis, PoincareBasis1D, DEFAULT_MESH_SIZE};
use crate::weights::{wlin_compute, Weight1D, WeightSetting, DEFAULT_WLIN_STEPS};

pub use report::{boxplots, read_records, report, BoxplotStats};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "POINCARE_CHAOS_WORKERS";

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn default_weights() -> Vec<WeightSetting> {
    vec![WeightSetting::Constant, WeightSetting::Wlin]
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_replications() -> usize {
    1
}
fn default_bootstrap() -> usize {
    30
}
fn default_validation() -> usize {
    100_000
}
fn default_mesh() -> usize {
    DEFAULT_MESH_SIZE
}
fn default_wlin_steps() -> usize {
    DEFAULT_WLIN_STEPS
}
fn default_reference_mc() -> usize {
    1_000_000
}
fn default_max_terms() -> usize {
    DEFAULT_MAX_TERMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `toy` or `flood`.
    pub model: String,
    /// Toy model dimension (default 4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default = "default_weights")]
    pub weights: Vec<WeightSetting>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Total degree; defaults to 8 for the toy model and 5 for the flood
    /// model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    pub ed_sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub n_replications: usize,
    /// Bootstrap refits per design; 0 keeps only the original fit.
    #[serde(default = "default_bootstrap")]
    pub n_bootstrap: usize,
    #[serde(default = "default_validation")]
    pub validation_size: usize,
    #[serde(default = "default_mesh")]
    pub mesh_size: usize,
    #[serde(default = "default_wlin_steps")]
    pub wlin_steps: usize,
    /// Pick-freeze sample size of the reference indices; 0 skips them.
    #[serde(default = "default_reference_mc")]
    pub reference_mc: usize,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn degree(&self) -> usize {
        self.degree.unwrap_or(if self.model == "flood" { 5 } else { 8 })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.ed_sizes.is_empty() || self.ed_sizes.contains(&0) {
            return bad("ed_sizes must be a non-empty list of positive sizes");
        }
        if self.ed_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("ed_sizes must be strictly ascending");
        }
        if self.ed_sizes[0] < 2 {
            return bad("ED sizes below 2 cannot be fitted");
        }
        if self.n_replications == 0 || self.validation_size < 2 || self.mesh_size == 0 || self.max_terms == 0 {
            return bad("n_replications, validation_size, mesh_size and max_terms must be positive");
        }
        if self.weights.is_empty() || self.methods.is_empty() {
            return bad("at least one weight setting and one method are required");
        }
        if self.reference_mc != 0 && self.reference_mc < 10_000 {
            return bad("reference_mc must be 0 or at least 10^4");
        }
        if self.dimension == Some(0) {
            return bad("dimension must be positive");
        }
        Ok(())
    }
}

/// Method label with the `w` prefix for weighted bases.
pub fn method_label(method: Method, weight: WeightSetting) -> String {
    match weight {
        WeightSetting::Constant => method.label().to_string(),
        WeightSetting::Wlin => format!("w{}", method.label()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    pub ed_size: usize,
    pub replicate: usize,
    /// 0 is the fit on the original design, `1..=n_bootstrap` the refits.
    pub bootstrap_id: usize,
    pub metric: String,
    /// Input name for per-variable metrics, empty otherwise.
    pub variable: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: String,
    pub ed_size: usize,
    pub replicate: usize,
    pub bootstrap_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceIndex {
    pub variable: String,
    pub total_sobol: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSeeds {
    pub ed_size: usize,
    pub replicate: usize,
    pub design: u64,
    pub bootstrap: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub root: u64,
    pub validation: u64,
    pub reference: u64,
    pub designs: Vec<DesignSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub weight: WeightSetting,
    pub variable: String,
    pub eigenvalues: Vec<f64>,
    pub poincare_constant: f64,
    pub existence_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub variables: Vec<String>,
    pub n_terms: usize,
    pub reference_sobol: Vec<ReferenceIndex>,
    pub bases: Vec<BasisSummary>,
    pub seeds: SeedLineage,
    pub failures: Vec<Failure>,
    pub boxplots: Vec<BoxplotStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<Record>,
    pub summary: ExperimentSummary,
}

impl ExperimentResult {
    pub fn all_fits_succeeded(&self) -> bool {
        self.summary.failures.is_empty()
    }

    /// Values of one metric, keyed by `(method, ed_size)`.
    pub fn values(&self, metric: &str, variable: &str) -> BTreeMap<(String, usize), Vec<f64>> {
        let mut out: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.metric == metric && r.variable == variable) {
            out.entry((r.method.clone(), r.ed_size)).or_default().push(r.value);
        }
        out
    }
}

const SEED_VALIDATION: u64 = 0;
const SEED_DESIGN: u64 = 1;
const SEED_BOOTSTRAP: u64 = 2;
const SEED_REFERENCE: u64 = 3;

fn build_chaos(model: &BenchmarkModel, weight: WeightSetting, cfg: &ExperimentConfig) -> Result<Arc<ChaosBasis>> {
    let p = cfg.degree();
    let bases: Result<Vec<Arc<PoincareBasis1D>>> = model
        .input_measure()
        .components()
        .par_iter()
        .map(|m| {
            let w = match weight {
                WeightSetting::Constant => Weight1D::constant(1.0)?,
                WeightSetting::Wlin => wlin_compute(m, cfg.wlin_steps)?,
            };
            Ok(Arc::new(build_basis(m, &w, p.max(1), cfg.mesh_size.max(20 * p.max(1)))?))
        })
        .collect();
    Ok(Arc::new(ChaosBasis::new(bases?, total_degree_set(model.dim(), p))?))
}

struct Validation {
    x: Array2<f64>,
    y: Array1<f64>,
    g: Array2<f64>,
}

/// Squared L² error and H¹(μ, w) error of an expansion on the validation
/// sample.
fn validation_errors(e: &ChaosExpansion, v: &Validation, weights: &Array2<f64>) -> Result<(f64, f64)> {
    let (yh, gh) = e.evaluate(v.x.view(), true)?;
    let n = v.y.len() as f64;
    let l2 = v.y.iter().zip(&yh).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let mut h1 = l2;
    for k in 0..e.dim() {
        h1 += v
            .g
            .column(k)
            .iter()
            .zip(gh.column(k))
            .zip(weights.column(k))
            .map(|((a, b), w)| w * (a - b).powi(2))
            .sum::<f64>()
            / n;
    }
    Ok((l2, h1))
}

struct Task {
    weight_idx: usize,
    ed_idx: usize,
    replicate: usize,
}

fn push(records: &mut Vec<Record>, label: &str, key: (usize, usize, usize), metric: &str, variable: &str, value: f64) {
    records.push(Record {
        method: label.to_string(),
        ed_size: key.0,
        replicate: key.1,
        bootstrap_id: key.2,
        metric: metric.to_string(),
        variable: variable.to_string(),
        value,
    });
}

/// Runs the experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = model_by_name(&cfg.model, cfg.dimension)?;
    let d = model.dim();
    let names = model.variables().to_vec();

    let chaos: Vec<Arc<ChaosBasis>> =
        cfg.weights.iter().map(|&w| build_chaos(&model, w, cfg)).collect::<Result<_>>()?;

    let validation_seed = seeds::derive(cfg.seed, &[SEED_VALIDATION]);
    let xv = model.input_measure().sample(cfg.validation_size, validation_seed)?;
    let validation = Validation { y: model.evaluate(xv.view())?, g: model.gradient(xv.view())?, x: xv };
    let val_weights: Vec<Array2<f64>> = chaos
        .iter()
        .map(|c| Array2::from_shape_fn(validation.x.dim(), |(i, k)| c.weight(k, validation.x[[i, k]])))
        .collect();

    let reference_seed = seeds::derive(cfg.seed, &[SEED_REFERENCE]);
    let reference = if cfg.reference_mc > 0 {
        reference_sobol(&model, cfg.reference_mc, reference_seed)?
            .into_iter()
            .zip(&names)
            .map(|(e, v)| ReferenceIndex { variable: v.clone(), total_sobol: e.mean, std_error: e.std_error })
            .collect()
    } else {
        Vec::new()
    };

    let mut lineage = Vec::new();
    for (ei, &n) in cfg.ed_sizes.iter().enumerate() {
        for r in 0..cfg.n_replications {
            lineage.push(DesignSeeds {
                ed_size: n,
                replicate: r,
                design: seeds::derive(cfg.seed, &[SEED_DESIGN, ei as u64, r as u64]),
                bootstrap: (1..=cfg.n_bootstrap)
                    .map(|b| seeds::derive(cfg.seed, &[SEED_BOOTSTRAP, ei as u64, r as u64, b as u64]))
                    .collect(),
            });
        }
    }

    let mut tasks = Vec::new();
    for wi in 0..cfg.weights.len() {
        for ei in 0..cfg.ed_sizes.len() {
            for r in 0..cfg.n_replications {
                tasks.push(Task { weight_idx: wi, ed_idx: ei, replicate: r });
            }
        }
    }

    let run_task = |t: &Task| -> (Vec<Record>, Vec<Failure>) {
        let weight = cfg.weights[t.weight_idx];
        let basis = &chaos[t.weight_idx];
        let seeds = &lineage[t.ed_idx * cfg.n_replications + t.replicate];
        let n = seeds.ed_size;
        let mut records = Vec::new();
        let mut failures = Vec::new();
        let fail = |failures: &mut Vec<Failure>, method: Method, b: usize, e: &Error| {
            failures.push(Failure {
                method: method_label(method, weight),
                ed_size: n,
                replicate: t.replicate,
                bootstrap_id: b,
                error: e.to_string(),
            })
        };
        let design = match model.design(n, seeds.design) {
            Ok(dsg) => dsg,
            Err(e) => {
                for &m in &cfg.methods {
                    fail(&mut failures, m, 0, &e);
                }
                return (records, failures);
            }
        };
        for b in 0..=cfg.n_bootstrap {
            let data: DesignData = if b == 0 { design.clone() } else { design.bootstrap(seeds.bootstrap[b - 1]) };
            for &method in &cfg.methods {
                let label = method_label(method, weight);
                let key = (n, t.replicate, b);
                let outcome = fit_with(method, basis, &data, cfg.max_terms).and_then(|f| {
                    let e = ChaosExpansion::new(basis.clone(), f.coefficients.clone())?;
                    let (l2, h1) = validation_errors(&e, &validation, &val_weights[t.weight_idx])?;
                    Ok((f, e, l2, h1))
                });
                let (f, e, l2, h1) = match outcome {
                    Ok(v) => v,
                    Err(err) => {
                        fail(&mut failures, method, b, &err);
                        continue;
                    }
                };
                push(&mut records, &label, key, "h1_error", "", h1);
                push(&mut records, &label, key, "l2_error", "", l2);
                push(&mut records, &label, key, "loo_error", "", f.loo_error);
                push(&mut records, &label, key, "n_terms", "", f.active_set.len() as f64);
                if let Ok(g) = gsa_report(&e) {
                    for k in 0..d {
                        push(&mut records, &label, key, "total_sobol", &names[k], g.total_sobol[k]);
                        push(&mut records, &label, key, "first_sobol", &names[k], g.first_sobol[k]);
                        push(&mut records, &label, key, "dgsm", &names[k], g.dgsm[k]);
                    }
                }
            }
        }
        (records, failures)
    };

    let outputs: Vec<(Vec<Record>, Vec<Failure>)> = with_workers(|| tasks.par_iter().map(run_task).collect())?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in outputs {
        records.extend(r);
        failures.extend(f);
    }

    let bases = cfg
        .weights
        .iter()
        .zip(&chaos)
        .flat_map(|(&w, c)| {
            c.bases().iter().zip(&names).map(move |(b, v)| BasisSummary {
                weight: w,
                variable: v.clone(),
                eigenvalues: b.eigenvalues().to_vec(),
                poincare_constant: b.poincare_constant(),
                existence_warning: b.existence_warning(),
            })
        })
        .collect();
    let summary = ExperimentSummary {
        config: cfg.clone(),
        variables: names,
        n_terms: chaos[0].len(),
        reference_sobol: reference,
        bases,
        seeds: SeedLineage { root: cfg.seed, validation: validation_seed, reference: reference_seed, designs: lineage },
        failures,
        boxplots: boxplots(&records),
    };
    Ok(ExperimentResult { records, summary })
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`] if set, else on the global
/// pool.
fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a worker count")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes `results.csv` and `summary.json` to the
/// configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = execute(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_records(&cfg.output_dir.join(RESULTS_FILE), &result.records)?;
    std::fs::write(cfg.output_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&result.summary)?)?;
    Ok(result)
}

fn default_basis_name() -> String {
    "basis".into()
}

/// Request for a univariate basis export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub measure: MeasureSpec,
    #[serde(default = "default_weight")]
    pub weight: WeightSetting,
    /// Number of non-constant modes `K`.
    pub n_modes: usize,
    #[serde(default = "default_mesh")]
    pub mesh_size: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_basis_name")]
    pub name: String,
    #[serde(default)]
    pub include_constant: bool,
}

fn default_weight() -> WeightSetting {
    WeightSetting::Constant
}

/// Writes `<name>.csv` (curves), `<name>_spectrum.json` and, for grid
/// weights, `<name>_weight.csv`. Returns the written paths.
pub fn export_basis(spec: &BasisSpec) -> Result<Vec<PathBuf>> {
    let measure = spec.measure.build()?;
    let weight = spec.weight.build(&measure)?;
    let basis = build_basis(&measure, &weight, spec.n_modes, spec.mesh_size)?;
    std::fs::create_dir_all(&spec.output_dir)?;
    let curves = spec.output_dir.join(format!("{}.csv", spec.name));
    basis.write_csv(&curves, spec.include_constant)?;
    let spectrum = spec.output_dir.join(format!("{}_spectrum.json", spec.name));
    basis.spectrum().write_json(&spectrum)?;
    let mut out = vec![curves, spectrum];
    if weight.grid().is_some() {
        let w = spec.output_dir.join(format!("{}_weight.csv", spec.name));
        weight.write_csv(&w)?;
        out.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"model": "toy", "degree": 3, "ed_sizes": [15, 30], "n_bootstrap": 2,
                "validation_size": 500, "mesh_size": 200, "reference_mc": 10000,
                "seed": 42, "output_dir": {:?}}}"#,
            dir.to_str().unwrap()
        ))
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = r#"{"model": "toy", "ed_sizes": [10, 20], "seed": 1, "output_dir": "out"}"#;
        let cfg = ExperimentConfig::from_json(ok).unwrap();
        assert_eq!(cfg.n_bootstrap, 30);
        assert_eq!(cfg.validation_size, 100_000);
        assert_eq!(cfg.degree(), 8);
        assert_eq!(cfg.weights, vec![WeightSetting::Constant, WeightSetting::Wlin]);
        let flood = r#"{"model": "flood", "ed_sizes": [20], "seed": 1, "output_dir": "o", "weights": ["unweighted"]}"#;
        assert_eq!(ExperimentConfig::from_json(flood).unwrap().degree(), 5);
        for bad in [
            r#"{"model": "toy", "ed_sizes": [20, 10], "seed": 1, "output_dir": "o"}"#,
            r#"{"model": "toy", "ed_sizes": [], "seed": 1, "output_dir": "o"}"#,
            r#"{"model": "toy", "ed_sizes": [10], "n_replications": 0, "seed": 1, "output_dir": "o"}"#,
            r#"{"model": "toy", "ed_sizes": [10], "seed": 1, "output_dir": "o", "typo": 3}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn labels() {
        assert_eq!(method_label(Method::Combined, WeightSetting::Wlin), "wPoinCE-comb-regr");
        assert_eq!(method_label(Method::Standard, WeightSetting::Constant), "PoinCE");
    }

    #[test]
    fn small_run_is_complete_and_replayable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let res = run_experiment(&cfg).unwrap();
        assert!(res.all_fits_succeeded(), "{:?}", res.summary.failures);
        // 2 weights × 3 methods × 2 sizes × 3 fits
        let h1 = res.records.iter().filter(|r| r.metric == "h1_error").count();
        assert_eq!(h1, 36);
        assert_eq!(res.summary.seeds.designs.len(), 2);
        assert_eq!(res.summary.reference_sobol.len(), 4);
        let first = std::fs::read(dir.path().join(RESULTS_FILE)).unwrap();
        let header = String::from_utf8_lossy(&first).lines().next().unwrap().to_string();
        assert_eq!(header, "method,ed_size,replicate,bootstrap_id,metric,variable,value");
        run_experiment(&cfg).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join(RESULTS_FILE)).unwrap());
        let text = report(dir.path()).unwrap();
        assert!(text.contains("wPoinCE-comb-regr"));
    }

    #[test]
    fn basis_export() {
        let dir = tempfile::tempdir().unwrap();
        let spec: BasisSpec = serde_json::from_str(&format!(
            r#"{{"measure": {{"family": "exponential", "rate": 1.0, "truncation": [0, 3]}},
                "weight": "wlin", "n_modes": 4, "mesh_size": 400, "output_dir": {:?}}}"#,
            dir.path().to_str().unwrap()
        ))
        .unwrap();
        let files = export_basis(&spec).unwrap();
        assert_eq!(files.len(), 3);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert!(text.starts_with("x,psi_1,psi_2,psi_3,psi_4,dpsi_1"));
    }
}
