//! Ridge readout, teacher-forced training and closed-loop forecasting.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, CircuitSpec, FeedbackInputs};
use crate::error::{HqrcError, Result};
use crate::measurement::{MeasurementScheme, Observables};
use crate::reservoir::{
    assemble_learning_vector, generate_weights, update_classical, update_hqrc, Activation, ActivationSet,
    LearningVector, ReservoirState, WeightDims, WeightDists, WeightSet,
};
use crate::rng::{seeded, stream, HqrcRng};
use crate::statevector::{perturb_angles, ShotConfig, StateVector};

/// `Ŵ_o = Y Rᵀ (R Rᵀ + βI)⁻¹`, solved through a Cholesky factorization.
///
/// `r` holds one learning vector per column, `y` one target per column.
pub fn fit_ridge(r: &DMatrix<f64>, y: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    if r.ncols() == 0 || r.ncols() != y.ncols() {
        return Err(HqrcError::usage(format!(
            "ridge needs matching nonzero sample counts, got {} and {}",
            r.ncols(),
            y.ncols()
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(HqrcError::config(format!("regularization must be >= 0, got {beta}")));
    }
    let mut gram = r * r.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += beta;
    }
    let rhs = r * y.transpose();
    let chol = Cholesky::new(gram)
        .ok_or_else(|| HqrcError::numeric("ridge system is not positive definite; increase beta"))?;
    let w_t = chol.solve(&rhs);
    if w_t.iter().any(|v| !v.is_finite()) {
        return Err(HqrcError::numeric("ridge solution is not finite"));
    }
    Ok(w_t.transpose())
}

/// Ridge objective `‖Y − W R‖² + β‖W‖²` (Frobenius).
pub fn ridge_objective(w: &DMatrix<f64>, r: &DMatrix<f64>, y: &DMatrix<f64>, beta: f64) -> f64 {
    (y - w * r).norm_squared() + beta * w.norm_squared()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub train_steps: usize,
    pub prune_steps: usize,
    pub config_hash: Option<String>,
    /// Normalizer scale of the training data, when known.
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Row-major `d_output × (1 + n_res + d_input)`.
    pub rows: usize,
    pub cols: usize,
    pub w_out: Vec<f64>,
    pub beta: f64,
    pub meta: TrainingMeta,
}

impl ReadoutModel {
    pub fn from_matrix(w: &DMatrix<f64>, beta: f64, meta: TrainingMeta) -> Self {
        let mut w_out = Vec::with_capacity(w.len());
        for i in 0..w.nrows() {
            w_out.extend(w.row(i).iter());
        }
        Self {
            rows: w.nrows(),
            cols: w.ncols(),
            w_out,
            beta,
            meta,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.w_out)
    }

    pub fn predict(&self, lv: &LearningVector) -> Result<Vec<f64>> {
        if lv.len() != self.cols {
            return Err(HqrcError::config(format!(
                "learning vector has length {}, readout expects {}",
                lv.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.w_out[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(lv.0.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.w_out.len() != m.rows * m.cols {
            return Err(HqrcError::Serialization("readout matrix size does not match its shape".into()));
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub train_steps: usize,
    pub prune_steps: usize,
    pub beta: f64,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_steps == 0 {
            return Err(HqrcError::config("training length must be positive"));
        }
        if self.prune_steps >= self.train_steps {
            return Err(HqrcError::config(format!(
                "prune length {} must be below training length {}",
                self.prune_steps, self.train_steps
            )));
        }
        Ok(())
    }
}

/// A recurrent feature generator driven one input at a time.
pub trait Reservoir {
    /// Consume `X_t`, advance the state and return `R_t`.
    fn step(&mut self, x: &[f64]) -> Result<LearningVector>;
    fn feature_len(&self) -> usize;
}

/// Circuit-backed reservoir: builds and simulates the circuit on every step,
/// then applies the hybrid update.
#[derive(Clone, Debug)]
pub struct HqrcReservoir {
    ansatz: Ansatz,
    observables: Observables,
    weights: WeightSet,
    acts: ActivationSet,
    shots: ShotConfig,
    state: ReservoirState,
    prev_measurement: Vec<f64>,
    sv: StateVector,
    shot_rng: HqrcRng,
    noise_rng: HqrcRng,
    d_input: usize,
}

impl HqrcReservoir {
    /// Assemble everything a run needs from its seed. `n_res` defaults to the
    /// measurement-vector length.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        spec: &CircuitSpec,
        scheme: &MeasurementScheme,
        acts: ActivationSet,
        dists: &WeightDists,
        d_input: usize,
        n_res: Option<usize>,
        seed: u64,
        shots: ShotConfig,
    ) -> Result<Self> {
        acts.validate()?;
        let observables = Observables::new(spec.n_qubits, scheme)?;
        let ansatz = Ansatz::new(spec, &observables, &mut seeded(seed, stream::RANDOM_BLOCKS))?;
        let dims = WeightDims {
            encoding: spec.encoding_dims(),
            d_input,
            n_res: n_res.unwrap_or(observables.len()),
            n_meas: observables.len(),
        };
        let weights = generate_weights(&dims, seed, dists)?;
        Self::with_parts(ansatz, observables, weights, acts, shots, d_input)
    }

    pub fn with_parts(
        ansatz: Ansatz,
        observables: Observables,
        weights: WeightSet,
        acts: ActivationSet,
        shots: ShotConfig,
        d_input: usize,
    ) -> Result<Self> {
        if ansatz.n_qubits() != observables.n_qubits() {
            return Err(HqrcError::config("circuit and observables use different registers"));
        }
        if weights.w_in.len() < ansatz.encoding_dims().len() {
            return Err(HqrcError::config("fewer input weight matrices than encoding layers"));
        }
        let n_res = weights.w_r.nrows();
        let sv = StateVector::new(ansatz.n_qubits())?;
        Ok(Self {
            prev_measurement: vec![0.0; observables.len()],
            state: ReservoirState::zeros(n_res),
            shot_rng: seeded(shots.rng_seed, stream::SHOTS),
            noise_rng: seeded(shots.rng_seed, stream::COHERENT_NOISE),
            ansatz,
            observables,
            weights,
            acts,
            shots,
            sv,
            d_input,
        })
    }

    pub fn state(&self) -> &ReservoirState {
        &self.state
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn observables(&self) -> &Observables {
        &self.observables
    }

    pub fn last_measurement(&self) -> &[f64] {
        &self.prev_measurement
    }

    /// Simulate the circuit for `x` from a fresh `|0…0⟩` and measure it.
    pub fn measure(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let feedback = FeedbackInputs {
            measurement: Some(&self.prev_measurement),
            reservoir: Some(self.state.r.as_slice()),
        };
        let mut gates = self.ansatz.build(x, feedback, &self.weights.w_in)?;
        if self.shots.coherent_sigma > 0.0 {
            gates = perturb_angles(&gates, self.shots.coherent_sigma, &mut self.noise_rng)?;
        }
        self.sv.reset();
        self.sv.apply_all(&gates)?;
        Ok(self
            .observables
            .measure(&self.sv, self.shots.shots, &mut self.shot_rng)?
            .values)
    }
}

impl Reservoir for HqrcReservoir {
    fn step(&mut self, x: &[f64]) -> Result<LearningVector> {
        if x.len() != self.d_input {
            return Err(HqrcError::config(format!(
                "input has {} components, reservoir expects {}",
                x.len(),
                self.d_input
            )));
        }
        let t = self.state.t;
        let m = self.measure(x).map_err(|e| e.at_step(t))?;
        self.state = update_hqrc(&self.state, &m, x, &self.acts, &self.weights).map_err(|e| e.at_step(t))?;
        self.prev_measurement = m;
        Ok(assemble_learning_vector(&self.state, x, self.acts.f_readout, self.acts.h_x))
    }

    fn feature_len(&self) -> usize {
        1 + self.state.r.len() + self.d_input
    }
}

/// Hyperparameters of the classical echo-state baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsnConfig {
    pub n_res: usize,
    pub leak: f64,
    pub activation: Activation,
    /// Multiplier on the unit-norm recurrent matrix.
    pub reservoir_scale: f64,
    /// Multiplier on the unit-norm input matrix.
    pub input_scale: f64,
    /// Weight of a constant extra input channel; 0 keeps the plain update.
    pub bias: f64,
    pub f_readout: Activation,
    pub h_x: Activation,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            n_res: 108,
            leak: 0.7,
            activation: Activation::Tanh,
            reservoir_scale: 1.0,
            input_scale: 1.0,
            bias: 0.0,
            f_readout: Activation::Tanh,
            h_x: Activation::Tanh,
        }
    }
}

/// Leaky echo-state network with random normalized weights.
#[derive(Clone, Debug)]
pub struct EsnReservoir {
    cfg: EsnConfig,
    w_r: DMatrix<f64>,
    w_x: DMatrix<f64>,
    state: ReservoirState,
    d_input: usize,
}

impl EsnReservoir {
    pub fn new(cfg: EsnConfig, d_input: usize, seed: u64, dists: &WeightDists) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.leak) {
            return Err(HqrcError::config(format!("leak rate must lie in [0, 1], got {}", cfg.leak)));
        }
        let w = generate_weights(
            &WeightDims {
                encoding: vec![],
                d_input: d_input + usize::from(cfg.bias != 0.0),
                n_res: cfg.n_res,
                n_meas: 0,
            },
            seed,
            dists,
        )?;
        Ok(Self {
            w_r: w.w_r * cfg.reservoir_scale,
            w_x: w.w_x * cfg.input_scale,
            state: ReservoirState::zeros(cfg.n_res),
            cfg,
            d_input,
        })
    }

    pub fn state(&self) -> &ReservoirState {
        &self.state
    }
}

impl Reservoir for EsnReservoir {
    fn step(&mut self, x: &[f64]) -> Result<LearningVector> {
        if x.len() != self.d_input {
            return Err(HqrcError::config(format!(
                "input has {} components, reservoir expects {}",
                x.len(),
                self.d_input
            )));
        }
        let t = self.state.t;
        let drive: Vec<f64> = if self.cfg.bias != 0.0 {
            x.iter().copied().chain([self.cfg.bias]).collect()
        } else {
            x.to_vec()
        };
        self.state = update_classical(&self.state, &drive, self.cfg.leak, self.cfg.activation, &self.w_r, &self.w_x)
            .map_err(|e| e.at_step(t))?;
        Ok(assemble_learning_vector(&self.state, x, self.cfg.f_readout, self.cfg.h_x))
    }

    fn feature_len(&self) -> usize {
        1 + self.cfg.n_res + self.d_input
    }
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub model: ReadoutModel,
    /// All learning vectors of the training window, one per column (pruned ones included).
    pub columns: DMatrix<f64>,
    /// Learning vector of the last training input; the forecast starts from it.
    pub last: LearningVector,
    /// RMSE of the fitted readout on the regression columns (teacher forced).
    pub train_rmse: f64,
}

/// Teacher-forced training over `inputs[0..train_steps]` with one-step-ahead
/// targets `inputs[t + 1]`. Columns with `t < prune_steps` are excluded.
pub fn run_training<R: Reservoir + ?Sized>(
    reservoir: &mut R,
    inputs: &[Vec<f64>],
    cfg: &TrainingConfig,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    if inputs.len() < cfg.train_steps + 1 {
        return Err(HqrcError::usage(format!(
            "training needs {} points, got {}",
            cfg.train_steps + 1,
            inputs.len()
        )));
    }
    let d = inputs[0].len();
    let feat = reservoir.feature_len();
    let mut columns = DMatrix::zeros(feat, cfg.train_steps);
    let mut last = None;
    for (t, x) in inputs.iter().take(cfg.train_steps).enumerate() {
        let lv = reservoir.step(x)?;
        columns.set_column(t, &lv.0);
        last = Some(lv);
    }
    let n = cfg.train_steps - cfg.prune_steps;
    let r = columns.columns(cfg.prune_steps, n).into_owned();
    let y = DMatrix::from_fn(d, n, |i, k| inputs[cfg.prune_steps + k + 1][i]);
    let w = fit_ridge(&r, &y, cfg.beta)?;
    let resid = &y - &w * &r;
    let train_rmse = (resid.norm_squared() / resid.len() as f64).sqrt();
    let model = ReadoutModel::from_matrix(
        &w,
        cfg.beta,
        TrainingMeta {
            train_steps: cfg.train_steps,
            prune_steps: cfg.prune_steps,
            config_hash: None,
            scale: None,
        },
    );
    Ok(TrainingOutcome {
        model,
        columns,
        last: last.expect("train_steps > 0"),
        train_rmse,
    })
}

/// Closed-loop forecast: `ŷ = W_o R`, then `ŷ` is fed back as the next input.
/// Starts from the learning vector of the last consumed input.
pub fn forecast<R: Reservoir + ?Sized>(
    model: &ReadoutModel,
    reservoir: &mut R,
    last: &LearningVector,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(steps);
    let mut lv = last.clone();
    for k in 0..steps {
        let y = model.predict(&lv)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(HqrcError::numeric_at("forecast diverged", k));
        }
        if k + 1 < steps {
            lv = reservoir.step(&y).map_err(|e| e.at_step(k))?;
        }
        out.push(y);
    }
    Ok(out)
}

/// Convenience used by tests and bindings: a dense column from a slice.
pub fn column(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{FeatureMap, Preset};

    #[test]
    fn scalar_ridge() {
        let r = DMatrix::from_element(1, 1, 1.0);
        let y = DMatrix::from_element(1, 1, 2.0);
        assert!((fit_ridge(&r, &y, 0.0).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((fit_ridge(&r, &y, 1.0).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_unregularized_system_fails() {
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        let y = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        assert!(matches!(fit_ridge(&r, &y, 0.0), Err(HqrcError::Numeric { .. })));
        assert!(fit_ridge(&r, &y, 1e-6).is_ok());
        assert!(matches!(fit_ridge(&r, &DMatrix::zeros(1, 2), 1.0), Err(HqrcError::Usage(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let w = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let m = ReadoutModel::from_matrix(
            &w,
            1e-8,
            TrainingMeta {
                train_steps: 10,
                prune_steps: 2,
                config_hash: Some("abc".into()),
                scale: Some(45.0),
            },
        );
        let back = ReadoutModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.matrix(), w);
        let lv = LearningVector(DVector::from_vec(vec![1.0, 0.0, -1.0]));
        assert_eq!(m.predict(&lv).unwrap(), vec![-2.0, -2.0]);
    }

    fn small_hqrc(seed: u64) -> HqrcReservoir {
        let spec = CircuitSpec::from_preset(Preset::L2, 3, 2, FeatureMap::PiTanh).unwrap();
        HqrcReservoir::new(
            &spec,
            &MeasurementScheme::all_to_all(2),
            ActivationSet::default(),
            &WeightDists::default(),
            3,
            None,
            seed,
            ShotConfig::default(),
        )
        .unwrap()
    }

    fn toy_inputs(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| {
                let t = k as f64 * 0.05;
                vec![t.sin() * 0.8, (1.3 * t).cos() * 0.5, (0.7 * t).sin() * 0.3]
            })
            .collect()
    }

    #[test]
    fn prune_to_single_column() {
        let mut res = small_hqrc(1);
        let cfg = TrainingConfig {
            train_steps: 20,
            prune_steps: 19,
            beta: 1e-6,
        };
        let out = run_training(&mut res, &toy_inputs(21), &cfg).unwrap();
        assert_eq!(out.columns.ncols(), 20);
        assert_eq!(out.model.cols, res.feature_len());
        assert!(out.train_rmse < 1e-3);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainingConfig {
            train_steps: 60,
            prune_steps: 10,
            beta: 1e-6,
        };
        let a = run_training(&mut small_hqrc(4), &toy_inputs(61), &cfg).unwrap();
        let b = run_training(&mut small_hqrc(4), &toy_inputs(61), &cfg).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn insufficient_data_is_usage_error() {
        let cfg = TrainingConfig {
            train_steps: 60,
            prune_steps: 10,
            beta: 1e-6,
        };
        assert!(matches!(
            run_training(&mut small_hqrc(0), &toy_inputs(60), &cfg),
            Err(HqrcError::Usage(_))
        ));
        let bad = TrainingConfig { prune_steps: 60, ..cfg };
        assert!(matches!(run_training(&mut small_hqrc(0), &toy_inputs(61), &bad), Err(HqrcError::Config(_))));
    }

    #[test]
    fn zero_step_forecast_is_empty() {
        let mut res = small_hqrc(2);
        let cfg = TrainingConfig {
            train_steps: 30,
            prune_steps: 5,
            beta: 1e-6,
        };
        let out = run_training(&mut res, &toy_inputs(31), &cfg).unwrap();
        assert!(forecast(&out.model, &mut res, &out.last, 0).unwrap().is_empty());
    }

    #[test]
    fn constant_signal_is_a_closed_loop_fixed_point() {
        let c = vec![0.4, -0.2, 0.1];
        let inputs = vec![c.clone(); 201];
        let cfg = TrainingConfig {
            train_steps: 200,
            prune_steps: 100,
            beta: 1e-12,
        };
        for mut res in [Box::new(small_hqrc(3)) as Box<dyn Reservoir>, Box::new(
            EsnReservoir::new(EsnConfig { n_res: 20, ..EsnConfig::default() }, 3, 3, &WeightDists::default()).unwrap(),
        )] {
            let out = run_training(res.as_mut(), &inputs, &cfg).unwrap();
            let fc = forecast(&out.model, res.as_mut(), &out.last, 50).unwrap();
            for p in fc {
                for (a, b) in p.iter().zip(&c) {
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn forecast_reports_divergence_step() {
        let mut res = small_hqrc(5);
        let model = ReadoutModel::from_matrix(
            &DMatrix::from_element(3, res.feature_len(), f64::MAX),
            0.0,
            TrainingMeta {
                train_steps: 1,
                prune_steps: 0,
                config_hash: None,
                scale: None,
            },
        );
        let lv = res.step(&[0.1, 0.2, 0.3]).unwrap();
        let err = forecast(&model, &mut res, &lv, 5).unwrap_err();
        assert!(matches!(err, HqrcError::Numeric { step: Some(0), .. }));
    }
}
