//! Classical recurrent state: weights, state updates and learning vectors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{HqrcError, Result};
use crate::rng::{seeded, stream};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `WᵀW`.
pub fn sigma_max(w: &DMatrix<f64>) -> f64 {
    let n = w.ncols();
    if n == 0 || w.nrows() == 0 {
        return 0.0;
    }
    // deterministic, non-symmetric start so it is not orthogonal to simple top vectors
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64) + 1.0).sqrt().fract());
    v /= v.norm();
    let wt = w.transpose();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let u = &wt * (w * &v);
        let next = v.dot(&u);
        let norm = u.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = u / norm;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Rayleigh quotient at the converged vector
    let wv = w * &v;
    wv.norm().max(lambda.max(0.0).sqrt())
}

/// `W / σ_max(W)`.
pub fn spectral_normalize(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(HqrcError::numeric("matrix has non-finite entries"));
    }
    let s = sigma_max(w);
    if s == 0.0 {
        return Err(HqrcError::config("cannot normalize a zero matrix"));
    }
    Ok(w / s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightDist {
    StandardNormal,
    /// Uniform on (−1, 1).
    Uniform,
    Identity,
}

impl WeightDist {
    fn sample<R: Rng + ?Sized>(self, rows: usize, cols: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        match self {
            WeightDist::Identity => {
                if rows != cols {
                    return Err(HqrcError::config(format!(
                        "identity weights need a square shape, got {rows}x{cols}"
                    )));
                }
                Ok(DMatrix::identity(rows, cols))
            }
            WeightDist::StandardNormal => {
                let raw = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
                spectral_normalize(&raw)
            }
            WeightDist::Uniform => {
                let u = Uniform::new(-1.0, 1.0).expect("valid range");
                let raw = DMatrix::from_fn(rows, cols, |_, _| u.sample(rng));
                spectral_normalize(&raw)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDists {
    pub w_in: WeightDist,
    pub w_r: WeightDist,
    pub w_m: WeightDist,
    pub w_x: WeightDist,
}

impl Default for WeightDists {
    fn default() -> Self {
        Self {
            w_in: WeightDist::StandardNormal,
            w_r: WeightDist::StandardNormal,
            w_m: WeightDist::Identity,
            w_x: WeightDist::StandardNormal,
        }
    }
}

/// Shapes needed to generate a [`WeightSet`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightDims {
    /// `d_{L_j}` of every data-encoding layer.
    pub encoding: Vec<usize>,
    pub d_input: usize,
    pub n_res: usize,
    pub n_meas: usize,
}

/// Fixed matrices of one run, each normalized to unit largest singular value.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    pub w_in: Vec<DMatrix<f64>>,
    pub w_r: DMatrix<f64>,
    pub w_m: DMatrix<f64>,
    pub w_x: DMatrix<f64>,
    pub seed: u64,
    pub dists: WeightDists,
}

/// Every matrix draws from its own seeded stream.
pub fn generate_weights(dims: &WeightDims, seed: u64, dists: &WeightDists) -> Result<WeightSet> {
    if dims.d_input == 0 || dims.n_res == 0 {
        return Err(HqrcError::config("input and reservoir dimensions must be positive"));
    }
    let w_in = dims
        .encoding
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let mut rng = seeded(seed, stream::ENCODING_BASE + j as u64);
            dists.w_in.sample(d, dims.d_input, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let w_r = dists
        .w_r
        .sample(dims.n_res, dims.n_res, &mut seeded(seed, stream::RESERVOIR_WEIGHTS))?;
    let w_m = if dims.n_meas == 0 {
        DMatrix::zeros(dims.n_res, 0)
    } else {
        dists
            .w_m
            .sample(dims.n_res, dims.n_meas, &mut seeded(seed, stream::MEASUREMENT_WEIGHTS))?
    };
    let w_x = dists
        .w_x
        .sample(dims.n_res, dims.d_input, &mut seeded(seed, stream::INPUT_WEIGHTS))?;
    Ok(WeightSet {
        w_in,
        w_r,
        w_m,
        w_x,
        seed,
        dists: dists.clone(),
    })
}

/// Elementwise activation from the named registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Tanh,
    Zero,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Zero => 0.0,
        }
    }

    fn apply_vec(self, v: DVector<f64>) -> DVector<f64> {
        match self {
            Activation::Identity => v,
            other => v.map(|x| other.apply(x)),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Zero => "zero",
        })
    }
}

impl FromStr for Activation {
    type Err = HqrcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" | "id" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "zero" => Ok(Activation::Zero),
            other => Err(HqrcError::config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Activations and leak rate of the hybrid update and the learning vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationSet {
    pub f_r: Activation,
    pub f_m: Activation,
    pub f_x: Activation,
    pub g: Activation,
    /// Applied to `r_t` in the learning vector.
    pub f_readout: Activation,
    /// Applied to `X_t` in the learning vector.
    pub h_x: Activation,
    pub leak: f64,
}

impl Default for ActivationSet {
    fn default() -> Self {
        Self {
            f_r: Activation::Identity,
            f_m: Activation::Identity,
            f_x: Activation::Identity,
            g: Activation::Identity,
            f_readout: Activation::Tanh,
            h_x: Activation::Tanh,
            leak: 0.7,
        }
    }
}

impl ActivationSet {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.leak) {
            return Err(HqrcError::config(format!("leak rate must lie in [0, 1], got {}", self.leak)));
        }
        Ok(())
    }

    /// A zero leak rate freezes the state at `r_0`.
    pub fn is_degenerate(&self) -> bool {
        self.leak == 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirState {
    pub r: DVector<f64>,
    pub t: usize,
}

impl ReservoirState {
    pub fn zeros(n_res: usize) -> Self {
        Self {
            r: DVector::zeros(n_res),
            t: 0,
        }
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HqrcError::numeric(format!("{what} has non-finite entries")))
    }
}

fn check_dims(w: &DMatrix<f64>, rows: usize, cols: usize, name: &str) -> Result<()> {
    if w.nrows() != rows || w.ncols() != cols {
        return Err(HqrcError::config(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// `r_t = (1−α) r_{t−1} + α g[f_r(W_r r_{t−1}) + f_M(W_M M_t) + f_X(W_X X_t)]`.
pub fn update_hqrc(
    prev: &ReservoirState,
    m_t: &[f64],
    x_t: &[f64],
    acts: &ActivationSet,
    weights: &WeightSet,
) -> Result<ReservoirState> {
    let n = prev.r.len();
    check_dims(&weights.w_r, n, n, "W_r")?;
    check_dims(&weights.w_m, n, m_t.len(), "W_M")?;
    check_dims(&weights.w_x, n, x_t.len(), "W_X")?;
    check_finite(prev.r.as_slice(), "reservoir state")?;
    check_finite(m_t, "measurement vector")?;
    check_finite(x_t, "input")?;
    let a = acts.leak;
    let recur = acts.f_r.apply_vec(&weights.w_r * &prev.r);
    let meas = if acts.f_m == Activation::Zero {
        DVector::zeros(n)
    } else {
        acts.f_m.apply_vec(&weights.w_m * DVector::from_column_slice(m_t))
    };
    let input = acts.f_x.apply_vec(&weights.w_x * DVector::from_column_slice(x_t));
    let drive = acts.g.apply_vec(recur + meas + input);
    let r = &prev.r * (1.0 - a) + drive * a;
    Ok(ReservoirState { r, t: prev.t + 1 })
}

/// `r_t = (1−α) r_{t−1} + α f(W_r r_{t−1} + W_X X_t)`.
pub fn update_classical(
    prev: &ReservoirState,
    x_t: &[f64],
    leak: f64,
    f: Activation,
    w_r: &DMatrix<f64>,
    w_x: &DMatrix<f64>,
) -> Result<ReservoirState> {
    let n = prev.r.len();
    check_dims(w_r, n, n, "W_r")?;
    check_dims(w_x, n, x_t.len(), "W_X")?;
    check_finite(prev.r.as_slice(), "reservoir state")?;
    check_finite(x_t, "input")?;
    let pre = w_r * &prev.r + w_x * DVector::from_column_slice(x_t);
    let r = &prev.r * (1.0 - leak) + f.apply_vec(pre) * leak;
    Ok(ReservoirState { r, t: prev.t + 1 })
}

/// Regression row `R_t = (1, f_R(r_t), h_X(X_t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LearningVector(pub DVector<f64>);

impl LearningVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

pub fn assemble_learning_vector(
    state: &ReservoirState,
    x_t: &[f64],
    f_readout: Activation,
    h_x: Activation,
) -> LearningVector {
    let n = state.r.len();
    let mut v = DVector::zeros(1 + n + x_t.len());
    v[0] = 1.0;
    for (i, &r) in state.r.iter().enumerate() {
        v[1 + i] = f_readout.apply(r);
    }
    for (i, &x) in x_t.iter().enumerate() {
        v[1 + n + i] = h_x.apply(x);
    }
    LearningVector(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_normalize_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((spectral_normalize(&id).unwrap() - &id).abs().max() < 1e-12);

        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let n = spectral_normalize(&d).unwrap();
        assert!((n - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5])).abs().max() < 1e-10);

        // WᵀW = [[1,1],[1,2]] has eigenvalues (3±√5)/2, so σ_max = (1+√5)/2
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let golden = 1.618_033_988_749_895;
        assert!((sigma_max(&w) - golden).abs() < 1e-9);
        assert!((spectral_normalize(&w).unwrap() - &w / golden).abs().max() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        assert!(matches!(spectral_normalize(&DMatrix::zeros(3, 2)), Err(HqrcError::Config(_))));
    }

    #[test]
    fn normalized_matrices_match_svd() {
        let dims = WeightDims {
            encoding: vec![8, 24],
            d_input: 3,
            n_res: 40,
            n_meas: 40,
        };
        for seed in 0..3 {
            let w = generate_weights(&dims, seed, &WeightDists::default()).unwrap();
            for m in w.w_in.iter().chain([&w.w_r, &w.w_x]) {
                let s = m.clone().svd(false, false).singular_values.max();
                assert!((s - 1.0).abs() < 1e-8, "sigma_max {s}");
            }
            assert_eq!(w.w_m, DMatrix::identity(40, 40));
        }
    }

    #[test]
    fn generate_weights_is_deterministic() {
        let dims = WeightDims {
            encoding: vec![4],
            d_input: 3,
            n_res: 6,
            n_meas: 6,
        };
        let a = generate_weights(&dims, 9, &WeightDists::default()).unwrap();
        let b = generate_weights(&dims, 9, &WeightDists::default()).unwrap();
        let c = generate_weights(&dims, 10, &WeightDists::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.w_r, c.w_r);
    }

    #[test]
    fn reference_generator_matches() {
        // seeded standard-normal 4x4, normalized by an SVD-computed σ_max
        let dims = WeightDims {
            encoding: vec![],
            d_input: 4,
            n_res: 4,
            n_meas: 0,
        };
        let w = generate_weights(&dims, 123, &WeightDists::default()).unwrap();
        let mut rng = seeded(123, stream::RESERVOIR_WEIGHTS);
        let raw = DMatrix::from_fn(4, 4, |_, _| StandardNormal.sample(&mut rng));
        let s: f64 = raw.clone().svd(false, false).singular_values.max();
        assert!((w.w_r - raw / s).abs().max() < 1e-10);
    }

    #[test]
    fn identity_weights_need_square_shape() {
        let dists = WeightDists {
            w_x: WeightDist::Identity,
            ..WeightDists::default()
        };
        let ok = WeightDims {
            encoding: vec![],
            d_input: 3,
            n_res: 3,
            n_meas: 3,
        };
        assert_eq!(generate_weights(&ok, 0, &dists).unwrap().w_x, DMatrix::identity(3, 3));
        let bad = WeightDims { n_res: 5, n_meas: 5, ..ok };
        assert!(generate_weights(&bad, 0, &dists).is_err());
    }

    fn small_weights() -> WeightSet {
        generate_weights(
            &WeightDims {
                encoding: vec![],
                d_input: 3,
                n_res: 3,
                n_meas: 3,
            },
            1,
            &WeightDists {
                w_x: WeightDist::Identity,
                ..WeightDists::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn update_hqrc_examples() {
        let w = small_weights();
        let prev = ReservoirState {
            r: DVector::from_vec(vec![0.1, -0.2, 0.3]),
            t: 4,
        };
        let m = [0.5, 0.5, -0.5];
        let x = [0.2, 0.4, 0.6];
        let frozen = ActivationSet {
            leak: 0.0,
            ..ActivationSet::default()
        };
        let out = update_hqrc(&prev, &m, &x, &frozen, &w).unwrap();
        assert_eq!(out.r, prev.r);
        assert_eq!(out.t, 5);

        let pass = ActivationSet {
            leak: 1.0,
            f_r: Activation::Zero,
            f_m: Activation::Zero,
            f_x: Activation::Identity,
            g: Activation::Identity,
            ..ActivationSet::default()
        };
        let out = update_hqrc(&prev, &m, &x, &pass, &w).unwrap();
        assert!((out.r - DVector::from_column_slice(&x)).abs().max() < 1e-15);
    }

    #[test]
    fn update_hqrc_rejects_non_finite() {
        let w = small_weights();
        let prev = ReservoirState::zeros(3);
        let acts = ActivationSet::default();
        let err = update_hqrc(&prev, &[0.0, f64::NAN, 0.0], &[0.0; 3], &acts, &w).unwrap_err();
        assert!(matches!(err, HqrcError::Numeric { .. }));
        assert!(update_hqrc(&prev, &[0.0; 3], &[0.0, 0.0], &acts, &w).is_err());
    }

    #[test]
    fn update_classical_examples() {
        let prev = ReservoirState {
            r: DVector::from_vec(vec![0.3, -0.1]),
            t: 0,
        };
        let w_r = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.4]);
        let w_x = DMatrix::from_row_slice(2, 1, &[0.5, -0.5]);
        assert_eq!(update_classical(&prev, &[0.7], 0.0, Activation::Tanh, &w_r, &w_x).unwrap().r, prev.r);

        let out = update_classical(&prev, &[0.2, 0.9], 1.0, Activation::Identity, &DMatrix::zeros(2, 2), &DMatrix::identity(2, 2))
            .unwrap();
        assert_eq!(out.r.as_slice(), &[0.2, 0.9]);

        // hand-rolled dense evaluation
        let x = 0.7;
        let leak = 0.6;
        let out = update_classical(&prev, &[x], leak, Activation::Tanh, &w_r, &w_x).unwrap();
        let pre0 = 0.1 * 0.3 + 0.2 * -0.1 + 0.5 * x;
        let pre1 = -0.3 * 0.3 + 0.4 * -0.1 + -0.5 * x;
        let want = [0.4 * 0.3 + leak * f64::tanh(pre0), 0.4 * -0.1 + leak * f64::tanh(pre1)];
        assert!((out.r[0] - want[0]).abs() < 1e-15 && (out.r[1] - want[1]).abs() < 1e-15);
    }

    #[test]
    fn learning_vector_examples() {
        let st = ReservoirState {
            r: DVector::from_vec(vec![0.5]),
            t: 0,
        };
        let lv = assemble_learning_vector(&st, &[0.1, 0.2, 0.3], Activation::Identity, Activation::Identity);
        assert_eq!(lv.as_slice(), &[1.0, 0.5, 0.1, 0.2, 0.3]);

        let st = ReservoirState::zeros(108);
        assert_eq!(assemble_learning_vector(&st, &[0.0; 3], Activation::Tanh, Activation::Tanh).len(), 112);

        let st = ReservoirState {
            r: DVector::from_vec(vec![10.0]),
            t: 0,
        };
        let lv = assemble_learning_vector(&st, &[], Activation::Tanh, Activation::Tanh);
        assert_eq!(lv.0[0], 1.0);
        assert!((lv.0[1] - 0.999_999_995_877_692_8).abs() < 1e-15);
    }

    #[test]
    fn leak_validation() {
        assert!(ActivationSet { leak: 1.5, ..ActivationSet::default() }.validate().is_err());
        let zero = ActivationSet { leak: 0.0, ..ActivationSet::default() };
        assert!(zero.validate().is_ok() && zero.is_degenerate());
    }
}
