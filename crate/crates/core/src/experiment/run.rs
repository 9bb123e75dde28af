//! One full run: truth, normalization, training, forecast and scoring.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_rk4_substeps, Normalizer, Trajectory, Units};
use crate::error::{HqrcError, Result};
use crate::metrics::{
    attractor_overlap, poincare_return_map, return_map_containment, rmse_series, vpt, OverlapReport, Vpt, VptConfig,
    BOX_MARGIN,
};
use crate::readout::{forecast, run_training, EsnReservoir, HqrcReservoir, ReadoutModel, Reservoir};

use super::config::{ExperimentConfig, Mode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub vpt: f64,
    pub vpt_steps: usize,
    pub censored: bool,
    pub epsilon: f64,
    /// Per-component σ of the compared truth window (normalized units).
    pub sigma: Vec<f64>,
    pub rmse: Vec<f64>,
    pub return_map_truth: Vec<(f64, f64)>,
    pub return_map_pred: Vec<(f64, f64)>,
    /// Share of predicted return-map pairs inside the truth pairs' expanded box.
    pub return_map_containment: f64,
    pub overlap: OverlapReport,
    pub train_rmse: f64,
    pub reservoir_size: usize,
    pub wall_clock_s: f64,
}

impl RunSummary {
    pub fn vpt_record(&self) -> Vpt {
        Vpt {
            time: self.vpt,
            steps: self.vpt_steps,
            censored: self.censored,
        }
    }
}

/// Everything a run produces; trajectories are in normalized units.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub truth: Trajectory,
    pub prediction: Trajectory,
    pub model: ReadoutModel,
    pub normalizer: Normalizer,
}

/// Raw truth of length `train_steps + test_steps + 1`.
pub fn generate_truth(cfg: &ExperimentConfig) -> Result<Trajectory> {
    let s = &cfg.system;
    integrate_rk4_substeps(&s.ode()?, s.initial()?, s.dt()?, s.train_steps + s.test_steps, s.substeps()?)
}

fn build_reservoir(cfg: &ExperimentConfig, seed: u64, d_input: usize) -> Result<Box<dyn Reservoir>> {
    Ok(match cfg.mode {
        Mode::Hqrc => Box::new(HqrcReservoir::new(
            &cfg.circuit.spec()?,
            &cfg.measurement,
            cfg.reservoir.activations(),
            &cfg.reservoir.weights,
            d_input,
            cfg.reservoir.n_res,
            seed,
            cfg.shot_config(seed),
        )?),
        Mode::ClassicalEsn => Box::new(EsnReservoir::new(cfg.esn, d_input, seed, &cfg.reservoir.weights)?),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let truth_raw = generate_truth(cfg)?;
    run_on_truth(cfg, seed, &truth_raw)
}

/// Same as [`run_experiment`] with a precomputed raw truth trajectory, which
/// sweeps share across cells with identical system settings.
pub fn run_on_truth(cfg: &ExperimentConfig, seed: u64, truth_raw: &Trajectory) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let s = &cfg.system;
    let (train, test) = (s.train_steps, s.test_steps);
    if truth_raw.len() < train + test {
        return Err(HqrcError::usage(format!(
            "truth has {} points, run needs {}",
            truth_raw.len(),
            train + test
        )));
    }
    let normalizer = Normalizer::fit(&truth_raw.slice(0, train + 1))?;
    let truth = normalizer.apply(truth_raw);
    let d = truth.dim();

    let mut reservoir = build_reservoir(cfg, seed, d)?;
    let mut outcome = run_training(reservoir.as_mut(), &truth.points, &cfg.training())?;
    outcome.model.meta.config_hash = Some(cfg.config_hash());
    outcome.model.meta.scale = Some(normalizer.scale);
    let pred_points = forecast(&outcome.model, reservoir.as_mut(), &outcome.last, test)?;

    let prediction = Trajectory::new(truth.dt, pred_points, Units::Normalized)?;
    let window = truth.slice(train, train + test);
    let vcfg = VptConfig::from_truth(&window, cfg.metrics.epsilon);
    let v = vpt(&prediction, &window, &vcfg)?;
    let rmse = rmse_series(&prediction, &window, &vcfg.sigma)?;
    let c = cfg.metrics.return_map_component;
    let map_truth = poincare_return_map(&window.component(c));
    let map_pred = poincare_return_map(&prediction.component(c));
    let overlap = attractor_overlap(&prediction, &window)?;

    let summary = RunSummary {
        config_hash: cfg.config_hash(),
        seed,
        mode: cfg.mode,
        vpt: v.time,
        vpt_steps: v.steps,
        censored: v.censored,
        epsilon: vcfg.epsilon,
        sigma: vcfg.sigma,
        rmse,
        return_map_containment: return_map_containment(&map_pred, &map_truth, BOX_MARGIN),
        return_map_truth: map_truth,
        return_map_pred: map_pred,
        overlap,
        train_rmse: outcome.train_rmse,
        reservoir_size: reservoir.feature_len() - 1 - d,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        summary,
        truth: window,
        prediction,
        model: outcome.model,
        normalizer,
    })
}
