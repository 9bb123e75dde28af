//! Grid sweeps over configuration axes and seeds, run in parallel.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{FeatureMap, Preset};
use crate::dynamics::Trajectory;
use crate::error::{HqrcError, Result};
use crate::measurement::MeasurementScheme;
use crate::statevector::Shots;

use super::config::ExperimentConfig;
use super::run::{generate_truth, run_on_truth, RunSummary};

/// Values to sweep; an empty axis keeps the template's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub feature_maps: Vec<FeatureMap>,
    pub presets: Vec<Preset>,
    pub n_qubits: Vec<usize>,
    pub n_layers: Vec<usize>,
    pub leak: Vec<f64>,
    pub beta: Vec<f64>,
    pub shots: Vec<Shots>,
    pub sigma: Vec<f64>,
    pub train_steps: Vec<usize>,
    pub prune_steps: Vec<usize>,
    pub max_order: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub template: ExperimentConfig,
    pub axes: SweepAxes,
    /// Seeds of every cell; falls back to the template's seed list.
    pub seeds: Vec<u64>,
}

/// One configuration of the grid, with the axis values that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub params: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

type Apply = Box<dyn Fn(&mut ExperimentConfig)>;

fn axis<T: Clone + ToString + 'static>(
    name: &str,
    values: &[T],
    set: impl Fn(&mut ExperimentConfig, T) + Copy + 'static,
) -> Vec<(String, String, Apply)> {
    values
        .iter()
        .cloned()
        .map(|v| {
            let label = v.to_string();
            let f: Apply = Box::new(move |c: &mut ExperimentConfig| set(c, v.clone()));
            (name.to_string(), label, f)
        })
        .collect()
}

impl SweepGrid {
    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            self.template.seeds.clone()
        } else {
            self.seeds.clone()
        }
    }

    /// Cartesian product of all nonempty axes, in a fixed order.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let a = &self.axes;
        let axes = vec![
            axis("feature_map", &a.feature_maps, |c, v| c.circuit.feature_map = v),
            axis("preset", &a.presets, |c, v| c.circuit.preset = v),
            axis("n_qubits", &a.n_qubits, |c, v| c.circuit.n_qubits = v),
            axis("n_layers", &a.n_layers, |c, v| c.circuit.n_layers = v),
            axis("leak", &a.leak, |c, v| c.reservoir.leak = v),
            axis("beta", &a.beta, |c, v| c.readout.beta = v),
            axis("shots", &a.shots, |c, v| c.noise.shots = v),
            axis("sigma", &a.sigma, |c, v| c.noise.sigma = v),
            axis("train_steps", &a.train_steps, |c, v| c.system.train_steps = v),
            axis("prune_steps", &a.prune_steps, |c, v| c.system.prune_steps = v),
            axis("max_order", &a.max_order, |c, v| {
                c.measurement = MeasurementScheme {
                    max_order: v,
                    ..c.measurement.clone()
                }
            }),
        ];
        let mut points = vec![GridPoint {
            params: BTreeMap::new(),
            config: self.template.clone(),
        }];
        for values in axes.into_iter().filter(|v| !v.is_empty()) {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for (name, label, apply) in &values {
                    let mut q = p.clone();
                    apply(&mut q.config);
                    q.params.insert(name.clone(), label.clone());
                    next.push(q);
                }
            }
            points = next;
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return Err(HqrcError::config("sweep needs at least one seed"));
        }
        for p in &mut points {
            p.config.seeds = seeds.clone();
        }
        Ok(points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub config_hash: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// JSON has no NaN; statistics of groups without successful runs use null.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Box-plot statistics of one configuration over its seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub config_hash: String,
    pub params: BTreeMap<String, String>,
    pub runs: usize,
    pub failures: usize,
    pub censored: usize,
    #[serde(with = "nan_as_null")]
    pub mean: f64,
    #[serde(with = "nan_as_null")]
    pub q1: f64,
    #[serde(with = "nan_as_null")]
    pub median: f64,
    #[serde(with = "nan_as_null")]
    pub q3: f64,
    #[serde(with = "nan_as_null")]
    pub iqr: f64,
    #[serde(with = "nan_as_null")]
    pub min: f64,
    #[serde(with = "nan_as_null")]
    pub max: f64,
    pub best_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
    pub groups: Vec<GroupStats>,
}

impl SweepReport {
    pub fn best(&self) -> Option<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.summary.is_some())
            .max_by(|a, b| {
                let (x, y) = (a.summary.as_ref().unwrap().vpt, b.summary.as_ref().unwrap().vpt);
                x.total_cmp(&y)
            })
    }
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Group cells by configuration hash, preserving first-appearance order.
pub fn aggregate(cells: &[CellResult]) -> Vec<GroupStats> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&CellResult>> = HashMap::new();
    for c in cells {
        let e = groups.entry(c.config_hash.as_str()).or_default();
        if e.is_empty() {
            order.push(c.config_hash.as_str());
        }
        e.push(c);
    }
    order
        .into_iter()
        .map(|h| {
            let members = &groups[h];
            let ok: Vec<&RunSummary> = members.iter().filter_map(|c| c.summary.as_ref()).collect();
            let mut v: Vec<f64> = ok.iter().map(|s| s.vpt).collect();
            v.sort_by(f64::total_cmp);
            let (mean, q1, median, q3, min, max) = if v.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            } else {
                (
                    v.iter().sum::<f64>() / v.len() as f64,
                    quantile_sorted(&v, 0.25),
                    quantile_sorted(&v, 0.5),
                    quantile_sorted(&v, 0.75),
                    v[0],
                    v[v.len() - 1],
                )
            };
            let best_seed = ok.iter().max_by(|a, b| a.vpt.total_cmp(&b.vpt)).map(|s| s.seed);
            GroupStats {
                config_hash: h.to_string(),
                params: members[0].params.clone(),
                runs: members.len(),
                failures: members.len() - ok.len(),
                censored: ok.iter().filter(|s| s.censored).count(),
                mean,
                q1,
                median,
                q3,
                iqr: q3 - q1,
                min,
                max,
                best_seed,
            }
        })
        .collect()
}

/// Run every (grid point, seed) cell on a pool of `workers` threads. Cells
/// are independent; a failing cell is recorded and the sweep continues. The
/// result order follows the grid, not completion order.
pub fn run_sweep(grid: &SweepGrid, workers: usize) -> Result<SweepReport> {
    run_sweep_with(grid, workers, |_| {})
}

/// As [`run_sweep`], calling `progress` after every finished cell.
pub fn run_sweep_with<F>(grid: &SweepGrid, workers: usize, progress: F) -> Result<SweepReport>
where
    F: Fn(&CellResult) + Sync,
{
    let points = grid.points()?;
    let seeds = grid.seeds();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let truths: Mutex<HashMap<String, std::result::Result<Trajectory, String>>> = Mutex::new(HashMap::new());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HqrcError::config(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let p = &points[i];
                let hash = p.config.config_hash();
                let result = p
                    .config
                    .validate()
                    .and_then(|_| shared_truth(&truths, &p.config))
                    .and_then(|t| run_on_truth(&p.config, seed, &t));
                let cell = match result {
                    Ok(out) => CellResult {
                        config_hash: hash,
                        seed,
                        params: p.params.clone(),
                        summary: Some(out.summary),
                        error: None,
                    },
                    Err(e) => CellResult {
                        config_hash: hash,
                        seed,
                        params: p.params.clone(),
                        summary: None,
                        error: Some(e.to_string()),
                    },
                };
                progress(&cell);
                cell
            })
            .collect()
    });
    let groups = aggregate(&cells);
    Ok(SweepReport { cells, groups })
}

/// Truth depends only on the system section; compute it once per distinct one.
fn shared_truth(
    cache: &Mutex<HashMap<String, std::result::Result<Trajectory, String>>>,
    cfg: &ExperimentConfig,
) -> Result<Trajectory> {
    let key = serde_json::to_string(&cfg.system)?;
    if let Some(t) = cache.lock().expect("truth cache poisoned").get(&key) {
        return t.clone().map_err(HqrcError::numeric);
    }
    let t = generate_truth(cfg).map_err(|e| e.to_string());
    cache.lock().expect("truth cache poisoned").insert(key, t.clone());
    t.map_err(HqrcError::numeric)
}
