//! Exact statevector simulation for small circuits.
//!
//! Basis index bit `q` holds qubit `q` (qubit 0 is the least significant bit).
//! Rotations follow `R_P(θ) = exp(-iθP/2)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HqrcError, Result};

/// Largest register the engine accepts.
pub const MAX_QUBITS: usize = 14;

/// Pauli axis, also used as measurement basis and rotation axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// Rotation gate about this axis.
    pub fn rotation(self, qubit: usize, theta: f64) -> GateOp {
        match self {
            Axis::X => GateOp::Rx { qubit, theta },
            Axis::Y => GateOp::Ry { qubit, theta },
            Axis::Z => GateOp::Rz { qubit, theta },
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        };
        f.write_str(s)
    }
}

impl FromStr for Axis {
    type Err = HqrcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(Axis::X),
            "Y" | "y" => Ok(Axis::Y),
            "Z" | "z" => Ok(Axis::Z),
            other => Err(HqrcError::config(format!("unknown Pauli axis '{other}'"))),
        }
    }
}

/// A single gate from the native set {RX, RY, RZ, U3, CX}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    Rx { qubit: usize, theta: f64 },
    Ry { qubit: usize, theta: f64 },
    Rz { qubit: usize, theta: f64 },
    /// `U3(α, β, γ) = R_Z(γ) R_X(β) R_Z(α)`, so `alpha` acts first.
    U3 {
        qubit: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    Cx { control: usize, target: usize },
}

impl GateOp {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Rx { qubit, .. }
            | GateOp::Ry { qubit, .. }
            | GateOp::Rz { qubit, .. }
            | GateOp::U3 { qubit, .. } => vec![qubit],
            GateOp::Cx { control, target } => vec![control, target],
        }
    }

    pub fn is_rotation(&self) -> bool {
        !matches!(self, GateOp::Cx { .. })
    }

    /// 2×2 unitary of a single-qubit gate in row-major order, `None` for CX.
    pub fn single_qubit_matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        match *self {
            GateOp::Rx { theta, .. } => Some(rx_matrix(theta)),
            GateOp::Ry { theta, .. } => Some(ry_matrix(theta)),
            GateOp::Rz { theta, .. } => Some(rz_matrix(theta)),
            GateOp::U3 {
                alpha, beta, gamma, ..
            } => Some(matmul2(
                &rz_matrix(gamma),
                &matmul2(&rx_matrix(beta), &rz_matrix(alpha)),
            )),
            GateOp::Cx { .. } => None,
        }
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= n_qubits) {
            return Err(HqrcError::config(format!(
                "gate {self:?} targets qubit {q} on a {n_qubits}-qubit register"
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(HqrcError::config(format!(
                "gate {self:?} uses the same qubit as control and target"
            )));
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rx_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

fn ry_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

fn rz_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]
}

fn matmul2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Product of same-axis Pauli operators on a set of qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    axis: Axis,
    qubits: Vec<usize>,
}

impl PauliString {
    pub fn new(axis: Axis, qubits: Vec<usize>) -> Result<Self> {
        if qubits.is_empty() || qubits.len() > 3 {
            return Err(HqrcError::config(format!(
                "Pauli string must act on 1 to 3 qubits, got {}",
                qubits.len()
            )));
        }
        if qubits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HqrcError::config(format!(
                "Pauli string qubits must be strictly increasing, got {qubits:?}"
            )));
        }
        Ok(Self { axis, qubits })
    }

    pub fn single(axis: Axis, qubit: usize) -> Self {
        Self {
            axis,
            qubits: vec![qubit],
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn order(&self) -> usize {
        self.qubits.len()
    }

    pub fn mask(&self) -> usize {
        self.qubits.iter().fold(0, |m, &q| m | (1 << q))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in &self.qubits {
            write!(f, "{}{}", self.axis, q)?;
        }
        Ok(())
    }
}

/// Parses the display form, e.g. `X0X1` or `Z2`. All factors must share one axis.
impl FromStr for PauliString {
    type Err = HqrcError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HqrcError::config(format!("malformed Pauli string '{s}'"));
        let mut axis: Option<Axis> = None;
        let mut qubits = Vec::new();
        let mut chars = s.trim().chars().peekable();
        while let Some(c) = chars.next() {
            let a: Axis = c.to_string().parse().map_err(|_| bad())?;
            if axis.is_some_and(|prev| prev != a) {
                return Err(HqrcError::config(format!("mixed axes in Pauli string '{s}'")));
            }
            axis = Some(a);
            let mut digits = String::new();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            qubits.push(digits.parse().map_err(|_| bad())?);
        }
        PauliString::new(axis.ok_or_else(bad)?, qubits)
    }
}

/// Number of measurement shots, or exact expectation values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Shots {
    #[default]
    Exact,
    Finite(u64),
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Shots {
    type Err = HqrcError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") || s == "inf" {
            return Ok(Shots::Exact);
        }
        let n: f64 = s
            .parse()
            .map_err(|_| HqrcError::config(format!("invalid shot count '{s}'")))?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(HqrcError::config(format!("shot count must be a positive integer, got '{s}'")));
        }
        Ok(Shots::Finite(n as u64))
    }
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => ser.serialize_str("exact"),
            Shots::Finite(n) => ser.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(0) => Err(serde::de::Error::custom("shot count must be positive")),
            Raw::Int(n) => Ok(Shots::Finite(n)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Shot budget and coherent angle noise for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub shots: Shots,
    /// Standard deviation of the Gaussian added to every rotation angle.
    pub coherent_sigma: f64,
    pub rng_seed: u64,
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self {
            shots: Shots::Exact,
            coherent_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

/// Pure state of an n-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(HqrcError::config(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len > (1 << MAX_QUBITS) {
            return Err(HqrcError::config(format!(
                "amplitude count {len} is not 2^n for 1 <= n <= {MAX_QUBITS}"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Reset to `|0…0⟩` without reallocating.
    pub fn reset(&mut self) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[0] = Complex64::new(1.0, 0.0);
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.check(self.n_qubits)?;
        match *gate {
            GateOp::Cx { control, target } => self.apply_cx(control, target),
            GateOp::Rx { qubit, .. }
            | GateOp::Ry { qubit, .. }
            | GateOp::Rz { qubit, .. }
            | GateOp::U3 { qubit, .. } => {
                let m = gate.single_qubit_matrix().expect("rotation has a matrix");
                self.apply_single(qubit, &m);
            }
        }
        Ok(())
    }

    pub fn apply_all(&mut self, gates: &[GateOp]) -> Result<()> {
        gates.iter().try_for_each(|g| self.apply(g))
    }

    fn apply_single(&mut self, qubit: usize, m: &[[Complex64; 2]; 2]) {
        let bit = 1usize << qubit;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let j = i | bit;
                let a = self.amplitudes[i];
                let b = self.amplitudes[j];
                self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
    }

    /// Born probabilities of the computational basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Exact `⟨ψ|P|ψ⟩` for a same-axis Pauli string.
    pub fn expectation(&self, obs: &PauliString) -> Result<f64> {
        if let Some(&q) = obs.qubits().iter().find(|&&q| q >= self.n_qubits) {
            return Err(HqrcError::config(format!(
                "observable {obs} addresses qubit {q} on a {}-qubit register",
                self.n_qubits
            )));
        }
        Ok(self.expectation_mask(obs.axis(), obs.mask()))
    }

    pub(crate) fn expectation_mask(&self, axis: Axis, mask: usize) -> f64 {
        let amps = &self.amplitudes;
        match axis {
            Axis::Z => amps
                .iter()
                .enumerate()
                .map(|(i, a)| parity_sign(i & mask) * a.norm_sqr())
                .sum(),
            Axis::X => amps
                .iter()
                .enumerate()
                .map(|(i, a)| (amps[i ^ mask].conj() * a).re)
                .sum(),
            Axis::Y => {
                // Y_mask |i> = i^k (-1)^{popcount(i & mask)} |i ^ mask>
                let phase = match mask.count_ones() % 4 {
                    0 => c(1.0, 0.0),
                    1 => c(0.0, 1.0),
                    2 => c(-1.0, 0.0),
                    _ => c(0.0, -1.0),
                };
                amps.iter()
                    .enumerate()
                    .map(|(i, a)| (amps[i ^ mask].conj() * phase * a * parity_sign(i & mask)).re)
                    .sum()
            }
        }
    }

    /// Copy of the state rotated so that `axis` measurements become Z measurements.
    pub fn rotated_to_basis(&self, axis: Axis) -> StateVector {
        let mut rotated = self.clone();
        let gate = |q| match axis {
            Axis::X => Some(GateOp::Ry {
                qubit: q,
                theta: -FRAC_PI_2,
            }),
            Axis::Y => Some(GateOp::Rx {
                qubit: q,
                theta: FRAC_PI_2,
            }),
            Axis::Z => None,
        };
        for q in 0..self.n_qubits {
            if let Some(g) = gate(q) {
                rotated.apply(&g).expect("basis change stays in range");
            }
        }
        rotated
    }

    /// Draw `shots` outcomes in the given basis. Bit `q` of an outcome index is 1
    /// when qubit `q` reads the −1 eigenvalue.
    pub fn sample_basis<R: Rng + ?Sized>(&self, axis: Axis, shots: u64, rng: &mut R) -> Result<CountTable> {
        if shots == 0 {
            return Err(HqrcError::usage("shot count must be at least 1"));
        }
        let probs = self.rotated_to_basis(axis).probabilities();
        Ok(CountTable {
            n_qubits: self.n_qubits,
            axis,
            counts: sample_multinomial(&probs, shots, rng),
        })
    }
}

fn parity_sign(bits: usize) -> f64 {
    if bits.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Multinomial draw via sequential conditional binomials.
fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last_nonzero {
            counts[k] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .expect("probability clamped to [0, 1]")
            .sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
        if mass <= 0.0 {
            counts[k] += remaining;
            remaining = 0;
        }
    }
    counts
}

/// Outcome histogram from measuring every qubit in one basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    n_qubits: usize,
    axis: Axis,
    counts: Vec<u64>,
}

impl CountTable {
    /// Build from `(bitstring, count)` pairs. The rightmost character is qubit 0.
    pub fn from_bitstrings(axis: Axis, pairs: &[(&str, u64)]) -> Result<Self> {
        let n_qubits = pairs
            .first()
            .map(|(b, _)| b.len())
            .ok_or_else(|| HqrcError::usage("count table needs at least one entry"))?;
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(HqrcError::config(format!("bitstring width {n_qubits} out of range")));
        }
        let mut counts = vec![0u64; 1 << n_qubits];
        for (bits, n) in pairs {
            if bits.len() != n_qubits {
                return Err(HqrcError::usage("bitstrings must share one width"));
            }
            let idx = usize::from_str_radix(bits, 2)
                .map_err(|_| HqrcError::usage(format!("invalid bitstring '{bits}'")))?;
            counts[idx] += n;
        }
        Ok(Self {
            n_qubits,
            axis,
            counts,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean of the ±1 outcome product on the observable's qubits.
    pub fn estimate(&self, obs: &PauliString) -> Result<f64> {
        if obs.axis() != self.axis {
            return Err(HqrcError::usage(format!(
                "observable {obs} cannot be estimated from {}-basis counts",
                self.axis
            )));
        }
        if obs.qubits().iter().any(|&q| q >= self.n_qubits) {
            return Err(HqrcError::usage(format!("observable {obs} exceeds count-table width")));
        }
        let total = self.total();
        if total == 0 {
            return Err(HqrcError::usage("empty count table"));
        }
        Ok(self.estimate_mask(obs.mask(), total))
    }

    pub(crate) fn estimate_mask(&self, mask: usize, total: u64) -> f64 {
        let signed: i64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, &n)| if (i & mask).count_ones().is_multiple_of(2) { n as i64 } else { -(n as i64) })
            .sum();
        signed as f64 / total as f64
    }
}

/// Free-function form of [`CountTable::estimate`].
pub fn estimate_from_counts(counts: &CountTable, obs: &PauliString) -> Result<f64> {
    counts.estimate(obs)
}

/// Probability-weighted parity average: the infinite-shot limit of
/// [`estimate_from_counts`] over a Born distribution.
pub fn estimate_from_distribution(weights: &[f64], obs: &PauliString) -> f64 {
    let mask = obs.mask();
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| parity_sign(i & mask) * w)
        .sum::<f64>()
        / total
}

/// Add an independent `N(0, σ²)` draw to every rotation angle. CX gates pass through.
pub fn perturb_angles<R: Rng + ?Sized>(gates: &[GateOp], sigma: f64, rng: &mut R) -> Result<Vec<GateOp>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(HqrcError::config(format!("coherent noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(gates.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut jitter = |theta: f64| theta + normal.sample(&mut *rng);
    Ok(gates
        .iter()
        .map(|g| match *g {
            GateOp::Rx { qubit, theta } => GateOp::Rx {
                qubit,
                theta: jitter(theta),
            },
            GateOp::Ry { qubit, theta } => GateOp::Ry {
                qubit,
                theta: jitter(theta),
            },
            GateOp::Rz { qubit, theta } => GateOp::Rz {
                qubit,
                theta: jitter(theta),
            },
            GateOp::U3 {
                qubit,
                alpha,
                beta,
                gamma,
            } => GateOp::U3 {
                qubit,
                alpha: jitter(alpha),
                beta: jitter(beta),
                gamma: jitter(gamma),
            },
            cx @ GateOp::Cx { .. } => cx,
        })
        .collect())
}
