//! Per-step circuit construction from a declarative layer list.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{HqrcError, Result};
use crate::measurement::Observables;
use crate::statevector::{Axis, GateOp};

/// Elementwise transform applied to rotation angles before encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMap {
    Tanh,
    PiTanh,
    PiSigmoid,
    Identity,
    PiIdentity,
}

impl FeatureMap {
    pub const ALL: [FeatureMap; 5] = [
        FeatureMap::Tanh,
        FeatureMap::PiTanh,
        FeatureMap::PiSigmoid,
        FeatureMap::Identity,
        FeatureMap::PiIdentity,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            FeatureMap::Tanh => x.tanh(),
            FeatureMap::PiTanh => PI * x.tanh(),
            FeatureMap::PiSigmoid => PI / (1.0 + (-x).exp()),
            FeatureMap::Identity => x,
            FeatureMap::PiIdentity => PI * x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMap::Tanh => "tanh",
            FeatureMap::PiTanh => "pi-tanh",
            FeatureMap::PiSigmoid => "pi-sigmoid",
            FeatureMap::Identity => "identity",
            FeatureMap::PiIdentity => "pi-identity",
        }
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMap {
    type Err = HqrcError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMap::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| HqrcError::config(format!("unknown feature map '{s}'")))
    }
}

/// Edge list on a register. Each edge `(a, b)` becomes `CX` with control `a`, target `b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitGraph {
    pub n_qubits: usize,
    pub edges: Vec<(usize, usize)>,
}

impl QubitGraph {
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a >= n_qubits || b >= n_qubits {
                return Err(HqrcError::config(format!(
                    "edge ({a}, {b}) out of range for {n_qubits} qubits"
                )));
            }
            if a == b {
                return Err(HqrcError::config(format!("self-loop on qubit {a}")));
            }
        }
        Ok(Self { n_qubits, edges })
    }

    /// True when no qubit is touched by two edges.
    pub fn is_matching(&self) -> bool {
        let mut seen = vec![false; self.n_qubits];
        for &(a, b) in &self.edges {
            if seen[a] || seen[b] {
                return false;
            }
            seen[a] = true;
            seen[b] = true;
        }
        true
    }

    pub fn cx_gates(&self) -> impl Iterator<Item = GateOp> + '_ {
        self.edges
            .iter()
            .map(|&(control, target)| GateOp::Cx { control, target })
    }
}

/// Ring edges `(i, (i+1) mod n)` split into two CX sub-rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingPartition {
    pub ring1: QubitGraph,
    pub ring2: QubitGraph,
}

/// Even-indexed ring edges go to round one, odd-indexed to round two. For odd
/// `n` the closing edge `(n-1, 0)` touches both rounds and is appended to the
/// smaller one (round two on ties), so that round is not a matching.
pub fn ring_graph(n_qubits: usize) -> Result<RingPartition> {
    if n_qubits < 2 {
        return Err(HqrcError::config(format!("ring graph needs at least 2 qubits, got {n_qubits}")));
    }
    if n_qubits == 2 {
        return Ok(RingPartition {
            ring1: QubitGraph::new(2, vec![(0, 1)])?,
            ring2: QubitGraph::new(2, vec![])?,
        });
    }
    let edge = |i: usize| (i, (i + 1) % n_qubits);
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let paired = if n_qubits.is_multiple_of(2) { n_qubits } else { n_qubits - 1 };
    for i in 0..paired {
        if i % 2 == 0 {
            r1.push(edge(i));
        } else {
            r2.push(edge(i));
        }
    }
    if paired < n_qubits {
        if r2.len() <= r1.len() {
            r2.push(edge(n_qubits - 1));
        } else {
            r1.push(edge(n_qubits - 1));
        }
    }
    Ok(RingPartition {
        ring1: QubitGraph::new(n_qubits, r1)?,
        ring2: QubitGraph::new(n_qubits, r2)?,
    })
}

/// Which CX sub-round a network layer uses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CxGraph {
    Ring1,
    Ring2,
    Edges(Vec<(usize, usize)>),
}

impl CxGraph {
    fn resolve(&self, n_qubits: usize) -> Result<QubitGraph> {
        match self {
            CxGraph::Ring1 => Ok(ring_graph(n_qubits)?.ring1),
            CxGraph::Ring2 => Ok(ring_graph(n_qubits)?.ring2),
            CxGraph::Edges(e) => QubitGraph::new(n_qubits, e.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackSource {
    /// Previous measurement vector `M_{t-1}`.
    Measurement,
    /// Previous reservoir state `r_{t-1}`.
    Reservoir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    /// Rotations about `axes` on every qubit, angles `φ(W_in X_t)`.
    /// Encoding layers take consecutive input-weight ids in order of appearance.
    DataEncoding { axes: Vec<Axis>, feature_map: FeatureMap },
    CxNetwork { graph: CxGraph },
    /// `R_P(φ(source[selection(q, P)]))` on every qubit for each `P` in `axes`.
    /// `selection` lists source indices in qubit-major, axis-minor order; when
    /// absent, `⟨P_q⟩` positions of the measurement vector are used.
    MeasurementFeedback {
        source: FeedbackSource,
        axes: Vec<Axis>,
        feature_map: FeatureMap,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selection: Option<Vec<usize>>,
    },
    /// Rotations with angles frozen uniform on [0, 2π], followed by CX rounds.
    RandomBlock { axes: Vec<Axis>, cx: Vec<CxGraph> },
}

/// Named layer families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    L1,
    L2,
    L3,
    L4,
    L5,
    /// Five single-axis encoding layers interleaved with the two ring rounds:
    /// RX, RY, CX(ring1), RZ, RX, CX(ring2), RY.
    #[serde(rename = "interleaved")]
    Interleaved,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::L1,
        Preset::L2,
        Preset::L3,
        Preset::L4,
        Preset::L5,
        Preset::Interleaved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::L1 => "L1",
            Preset::L2 => "L2",
            Preset::L3 => "L3",
            Preset::L4 => "L4",
            Preset::L5 => "L5",
            Preset::Interleaved => "interleaved",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = HqrcError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HqrcError::config(format!("unknown layer preset '{s}'")))
    }
}

const L2_AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
const U3_AXES: [Axis; 3] = [Axis::Z, Axis::X, Axis::Z];

fn l2_layers(n_layers: usize, phi: FeatureMap) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(2 * n_layers);
    for k in 0..n_layers {
        layers.push(LayerSpec::DataEncoding {
            axes: vec![L2_AXES[k % 3]],
            feature_map: phi,
        });
        layers.push(LayerSpec::CxNetwork {
            graph: if k % 2 == 0 { CxGraph::Ring1 } else { CxGraph::Ring2 },
        });
    }
    layers
}

fn feedback_block(phi: FeatureMap) -> LayerSpec {
    LayerSpec::MeasurementFeedback {
        source: FeedbackSource::Measurement,
        axes: Axis::ALL.to_vec(),
        feature_map: phi,
        selection: None,
    }
}

fn random_block() -> LayerSpec {
    LayerSpec::RandomBlock {
        axes: U3_AXES.to_vec(),
        cx: vec![CxGraph::Ring1, CxGraph::Ring2],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub layers: Vec<LayerSpec>,
}

impl CircuitSpec {
    /// Expand a named preset. `n_layers` counts repetitions of the basic
    /// block (L1) or single-rotation layers (L2–L5); `Interleaved` ignores it.
    pub fn from_preset(preset: Preset, n_qubits: usize, n_layers: usize, phi: FeatureMap) -> Result<Self> {
        if n_layers == 0 && preset != Preset::Interleaved {
            return Err(HqrcError::config("preset needs at least one layer"));
        }
        let layers = match preset {
            Preset::L1 => (0..n_layers)
                .flat_map(|_| {
                    [
                        LayerSpec::DataEncoding {
                            axes: U3_AXES.to_vec(),
                            feature_map: phi,
                        },
                        LayerSpec::CxNetwork { graph: CxGraph::Ring1 },
                        LayerSpec::CxNetwork { graph: CxGraph::Ring2 },
                    ]
                })
                .collect(),
            Preset::L2 => l2_layers(n_layers, phi),
            Preset::L3 => {
                let mut l = l2_layers(n_layers, phi);
                l.push(feedback_block(phi));
                l
            }
            Preset::L4 => {
                let mut l = l2_layers(n_layers, phi);
                l.push(feedback_block(phi));
                l.push(random_block());
                l
            }
            Preset::L5 => {
                let mut l = l2_layers(n_layers, phi);
                l.push(random_block());
                l
            }
            Preset::Interleaved => {
                let enc = |a: Axis| LayerSpec::DataEncoding {
                    axes: vec![a],
                    feature_map: phi,
                };
                vec![
                    enc(Axis::X),
                    enc(Axis::Y),
                    LayerSpec::CxNetwork { graph: CxGraph::Ring1 },
                    enc(Axis::Z),
                    enc(Axis::X),
                    LayerSpec::CxNetwork { graph: CxGraph::Ring2 },
                    enc(Axis::Y),
                ]
            }
        };
        let spec = Self { n_qubits, layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::statevector::MAX_QUBITS {
            return Err(HqrcError::config(format!("qubit count {} out of range", self.n_qubits)));
        }
        for layer in &self.layers {
            match layer {
                LayerSpec::DataEncoding { axes, .. } | LayerSpec::RandomBlock { axes, .. } if axes.is_empty() => {
                    return Err(HqrcError::config("rotation layer needs at least one axis"));
                }
                LayerSpec::CxNetwork { graph } => {
                    graph.resolve(self.n_qubits)?;
                }
                LayerSpec::RandomBlock { cx, .. } => {
                    for g in cx {
                        g.resolve(self.n_qubits)?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Parameter count `d_{L_j}` of each data-encoding layer, in weight-id order.
    pub fn encoding_dims(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::DataEncoding { axes, .. } => Some(self.n_qubits * axes.len()),
                _ => None,
            })
            .collect()
    }

    pub fn has_feedback(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, LayerSpec::MeasurementFeedback { .. }))
    }

    pub fn uses_source(&self, source: FeedbackSource) -> bool {
        self.layers.iter().any(|l| {
            matches!(l, LayerSpec::MeasurementFeedback { source: s, .. } if *s == source)
        })
    }
}

/// `φ(W_in · X_t)` elementwise.
pub fn encode_input(w_in: &DMatrix<f64>, x: &[f64], phi: FeatureMap) -> Result<Vec<f64>> {
    if w_in.ncols() != x.len() {
        return Err(HqrcError::config(format!(
            "input weight has {} columns but input has {} components",
            w_in.ncols(),
            x.len()
        )));
    }
    let y = w_in * DVector::from_column_slice(x);
    Ok(y.iter().map(|&v| phi.apply(v)).collect())
}

/// Feedback rotation angles: `(qubit, axis, φ(source[index]))` per target.
pub fn feedback_angles(
    source: &[f64],
    selection: &[(usize, Axis, usize)],
    phi: FeatureMap,
) -> Result<Vec<(usize, Axis, f64)>> {
    selection
        .iter()
        .map(|&(q, axis, idx)| {
            source
                .get(idx)
                .map(|&v| (q, axis, phi.apply(v)))
                .ok_or_else(|| {
                    HqrcError::config(format!(
                        "feedback selection index {idx} out of range for source of length {}",
                        source.len()
                    ))
                })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
enum CompiledLayer {
    Encoding {
        axes: Vec<Axis>,
        weight_id: usize,
        phi: FeatureMap,
    },
    Cx(QubitGraph),
    Feedback {
        source: FeedbackSource,
        targets: Vec<(usize, Axis, usize)>,
        phi: FeatureMap,
    },
    Random {
        rotations: Vec<GateOp>,
        cx: Vec<QubitGraph>,
    },
}

/// Previous-step values available to feedback layers. Missing values read as zeros.
#[derive(Clone, Copy, Debug, Default)]
pub struct FeedbackInputs<'a> {
    pub measurement: Option<&'a [f64]>,
    pub reservoir: Option<&'a [f64]>,
}

/// A circuit spec with resolved graphs, feedback wiring and frozen random angles.
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    n_qubits: usize,
    layers: Vec<CompiledLayer>,
    encoding_dims: Vec<usize>,
}

impl Ansatz {
    /// Resolve `spec`. Random-block angles are drawn here, once, from `rng`.
    pub fn new<R: Rng + ?Sized>(spec: &CircuitSpec, observables: &Observables, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_qubits;
        let angle = Uniform::new_inclusive(0.0, TAU).expect("valid range");
        let mut weight_id = 0;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let compiled = match layer {
                LayerSpec::DataEncoding { axes, feature_map } => {
                    weight_id += 1;
                    CompiledLayer::Encoding {
                        axes: axes.clone(),
                        weight_id: weight_id - 1,
                        phi: *feature_map,
                    }
                }
                LayerSpec::CxNetwork { graph } => CompiledLayer::Cx(graph.resolve(n)?),
                LayerSpec::MeasurementFeedback {
                    source,
                    axes,
                    feature_map,
                    selection,
                } => {
                    let slots: Vec<(usize, Axis)> =
                        (0..n).flat_map(|q| axes.iter().map(move |&a| (q, a))).collect();
                    let targets = match selection {
                        Some(sel) => {
                            if sel.len() != slots.len() {
                                return Err(HqrcError::config(format!(
                                    "feedback selection has {} entries, layer needs {}",
                                    sel.len(),
                                    slots.len()
                                )));
                            }
                            slots.iter().zip(sel).map(|(&(q, a), &i)| (q, a, i)).collect()
                        }
                        None => slots
                            .iter()
                            .map(|&(q, a)| {
                                observables.single_index(a, q).map(|i| (q, a, i)).ok_or_else(|| {
                                    HqrcError::config(format!(
                                        "default feedback needs <{a}{q}> in the measurement scheme"
                                    ))
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    };
                    CompiledLayer::Feedback {
                        source: *source,
                        targets,
                        phi: *feature_map,
                    }
                }
                LayerSpec::RandomBlock { axes, cx } => {
                    let mut rotations = Vec::with_capacity(n * axes.len());
                    for q in 0..n {
                        for &a in axes {
                            rotations.push(a.rotation(q, angle.sample(rng)));
                        }
                    }
                    CompiledLayer::Random {
                        rotations,
                        cx: cx.iter().map(|g| g.resolve(n)).collect::<Result<_>>()?,
                    }
                }
            };
            layers.push(compiled);
        }
        Ok(Self {
            n_qubits: n,
            layers,
            encoding_dims: spec.encoding_dims(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn encoding_dims(&self) -> &[usize] {
        &self.encoding_dims
    }

    /// Frozen random-block angles in gate order.
    pub fn random_angles(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                CompiledLayer::Random { rotations, .. } => Some(rotations),
                _ => None,
            })
            .flatten()
            .map(|g| match *g {
                GateOp::Rx { theta, .. } | GateOp::Ry { theta, .. } | GateOp::Rz { theta, .. } => theta,
                _ => unreachable!("random blocks hold single-axis rotations"),
            })
            .collect()
    }

    /// Gate list for one time step.
    pub fn build(&self, x: &[f64], feedback: FeedbackInputs<'_>, w_in: &[DMatrix<f64>]) -> Result<Vec<GateOp>> {
        let mut gates = Vec::new();
        for layer in &self.layers {
            match layer {
                CompiledLayer::Encoding { axes, weight_id, phi } => {
                    let w = w_in.get(*weight_id).ok_or_else(|| {
                        HqrcError::config(format!("missing input weight matrix for encoding layer {weight_id}"))
                    })?;
                    let expected = self.n_qubits * axes.len();
                    if w.nrows() != expected {
                        return Err(HqrcError::config(format!(
                            "input weight {weight_id} has {} rows, layer needs {expected}",
                            w.nrows()
                        )));
                    }
                    let angles = encode_input(w, x, *phi)?;
                    for q in 0..self.n_qubits {
                        for (k, &a) in axes.iter().enumerate() {
                            gates.push(a.rotation(q, angles[q * axes.len() + k]));
                        }
                    }
                }
                CompiledLayer::Cx(graph) => gates.extend(graph.cx_gates()),
                CompiledLayer::Feedback { source, targets, phi } => {
                    let values = match source {
                        FeedbackSource::Measurement => feedback.measurement,
                        FeedbackSource::Reservoir => feedback.reservoir,
                    };
                    match values {
                        Some(v) => {
                            for (q, a, theta) in feedback_angles(v, targets, *phi)? {
                                gates.push(a.rotation(q, theta));
                            }
                        }
                        None => {
                            for &(q, a, _) in targets {
                                gates.push(a.rotation(q, phi.apply(0.0)));
                            }
                        }
                    }
                }
                CompiledLayer::Random { rotations, cx } => {
                    gates.extend(rotations.iter().copied());
                    for g in cx {
                        gates.extend(g.cx_gates());
                    }
                }
            }
        }
        Ok(gates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::MeasurementScheme;
    use crate::rng::seeded;

    fn observables(n: usize) -> Observables {
        Observables::new(n, &MeasurementScheme::default()).unwrap()
    }

    fn count(gates: &[GateOp]) -> (usize, usize) {
        let rot = gates.iter().filter(|g| g.is_rotation()).count();
        (rot, gates.len() - rot)
    }

    #[test]
    fn feature_maps() {
        assert_eq!(FeatureMap::Tanh.apply(0.0), 0.0);
        assert_eq!(FeatureMap::PiSigmoid.apply(0.0), PI / 2.0);
        assert_eq!(FeatureMap::PiIdentity.apply(0.5), PI * 0.5);
        assert_eq!(FeatureMap::Identity.apply(-0.3), -0.3);
        for m in FeatureMap::ALL {
            assert_eq!(m.name().parse::<FeatureMap>().unwrap(), m);
        }
    }

    #[test]
    fn encode_input_examples() {
        let id3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(encode_input(&id3, &[0.0, 0.0, 0.0], FeatureMap::Tanh).unwrap(), vec![0.0; 3]);
        let id1 = DMatrix::<f64>::identity(1, 1);
        assert_eq!(encode_input(&id1, &[0.0], FeatureMap::PiSigmoid).unwrap(), vec![PI / 2.0]);
        let w = DMatrix::from_row_slice(1, 3, &[2.0, 0.0, 0.0]);
        let got = encode_input(&w, &[0.5, 0.1, -0.3], FeatureMap::PiTanh).unwrap();
        // π·tanh(1) evaluated to 20 digits
        assert!((got[0] - 2.392_618_605_367_55).abs() < 1e-15);
        assert!(matches!(encode_input(&id3, &[0.0], FeatureMap::Tanh), Err(HqrcError::Config(_))));
    }

    #[test]
    fn ring_graph_examples() {
        let r = ring_graph(4).unwrap();
        assert_eq!(r.ring1.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(r.ring2.edges, vec![(1, 2), (3, 0)]);
        let r = ring_graph(2).unwrap();
        assert_eq!(r.ring1.edges, vec![(0, 1)]);
        assert!(r.ring2.edges.is_empty());
        let r = ring_graph(8).unwrap();
        assert_eq!(r.ring1.edges.len(), 4);
        assert_eq!(r.ring2.edges.len(), 4);
        assert!(r.ring1.is_matching() && r.ring2.is_matching());
        let mut all: Vec<_> = r.ring1.edges.iter().chain(&r.ring2.edges).copied().collect();
        all.sort();
        let mut cycle: Vec<_> = (0..8).map(|i| (i, (i + 1) % 8)).collect();
        cycle.sort();
        assert_eq!(all, cycle);
        assert!(ring_graph(1).is_err());
    }

    #[test]
    fn odd_ring_places_closing_edge_in_second_round() {
        let r = ring_graph(5).unwrap();
        assert_eq!(r.ring1.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(r.ring2.edges, vec![(1, 2), (3, 4), (4, 0)]);
        assert!(r.ring1.is_matching());
    }

    #[test]
    fn zero_weight_encoding_layer() {
        let spec = CircuitSpec {
            n_qubits: 2,
            layers: vec![LayerSpec::DataEncoding {
                axes: vec![Axis::X],
                feature_map: FeatureMap::PiSigmoid,
            }],
        };
        let mut rng = seeded(0, 0);
        let a = Ansatz::new(&spec, &observables(2), &mut rng).unwrap();
        let gates = a.build(&[0.3, -0.2, 0.9], FeedbackInputs::default(), &[DMatrix::zeros(2, 3)]).unwrap();
        assert_eq!(
            gates,
            vec![
                GateOp::Rx { qubit: 0, theta: PI / 2.0 },
                GateOp::Rx { qubit: 1, theta: PI / 2.0 }
            ]
        );
        assert!(matches!(
            a.build(&[0.0; 3], FeedbackInputs::default(), &[]),
            Err(HqrcError::Config(_))
        ));
    }

    fn build_preset(p: Preset, n: usize, layers: usize) -> Vec<GateOp> {
        let spec = CircuitSpec::from_preset(p, n, layers, FeatureMap::Tanh).unwrap();
        let mut rng = seeded(1, 0);
        let a = Ansatz::new(&spec, &observables(n), &mut rng).unwrap();
        let w: Vec<_> = spec.encoding_dims().iter().map(|&d| DMatrix::from_element(d, 3, 0.1)).collect();
        a.build(&[0.1, 0.2, 0.3], FeedbackInputs::default(), &w).unwrap()
    }

    #[test]
    fn preset_structure_counts() {
        assert_eq!(count(&build_preset(Preset::L1, 8, 1)), (24, 8));
        assert_eq!(count(&build_preset(Preset::Interleaved, 8, 1)), (40, 8));
        for n in [3usize, 4, 6, 8] {
            let ring_cx = |k: usize| {
                let r = ring_graph(n).unwrap();
                (0..k).map(|i| if i % 2 == 0 { r.ring1.edges.len() } else { r.ring2.edges.len() }).sum::<usize>()
            };
            for layers in 1..5 {
                assert_eq!(count(&build_preset(Preset::L1, n, layers)), (3 * n * layers, n * layers));
                assert_eq!(count(&build_preset(Preset::L2, n, layers)), (n * layers, ring_cx(layers)));
                assert_eq!(count(&build_preset(Preset::L3, n, layers)), (n * layers + 3 * n, ring_cx(layers)));
                assert_eq!(
                    count(&build_preset(Preset::L4, n, layers)),
                    (n * layers + 6 * n, ring_cx(layers) + n)
                );
                assert_eq!(count(&build_preset(Preset::L5, n, layers)), (n * layers + 3 * n, ring_cx(layers) + n));
            }
        }
    }

    #[test]
    fn feedback_angle_examples() {
        let sel = vec![(0, Axis::X, 0), (3, Axis::Z, 1)];
        let zeros = feedback_angles(&[0.0, 0.0], &sel, FeatureMap::Identity).unwrap();
        assert!(zeros.iter().all(|&(_, _, t)| t == 0.0));
        let got = feedback_angles(&[1.0, -0.5], &sel, FeatureMap::Identity).unwrap();
        assert_eq!(got[0], (0, Axis::X, 1.0));
        let got = feedback_angles(&[1.0, -0.5], &sel, FeatureMap::PiTanh).unwrap();
        // π·tanh(-0.5) evaluated to 20 digits
        assert!((got[1].2 + 1.451_783_866_345_845_8).abs() < 1e-15);
        assert!(matches!(
            feedback_angles(&[1.0], &sel, FeatureMap::Identity),
            Err(HqrcError::Config(_))
        ));
    }

    #[test]
    fn default_feedback_reads_single_qubit_expectations() {
        let n = 2;
        let obs = observables(n);
        let spec = CircuitSpec {
            n_qubits: n,
            layers: vec![feedback_block(FeatureMap::Identity)],
        };
        let a = Ansatz::new(&spec, &obs, &mut seeded(0, 0)).unwrap();
        let m: Vec<f64> = (0..obs.len()).map(|i| i as f64 / 10.0).collect();
        let gates = a
            .build(&[], FeedbackInputs { measurement: Some(&m), reservoir: None }, &[])
            .unwrap();
        let expect = |axis, q| m[obs.single_index(axis, q).unwrap()];
        assert_eq!(gates[0], GateOp::Rx { qubit: 0, theta: expect(Axis::X, 0) });
        assert_eq!(gates[4], GateOp::Ry { qubit: 1, theta: expect(Axis::Y, 1) });
        // first step: no measurement yet
        let first = a.build(&[], FeedbackInputs::default(), &[]).unwrap();
        assert!(first.iter().all(|g| matches!(g, GateOp::Rx { theta, .. } | GateOp::Ry { theta, .. } | GateOp::Rz { theta, .. } if *theta == 0.0)));
    }

    #[test]
    fn random_blocks_are_frozen_per_seed() {
        let spec = CircuitSpec::from_preset(Preset::L5, 4, 2, FeatureMap::Tanh).unwrap();
        let obs = observables(4);
        let a = Ansatz::new(&spec, &obs, &mut seeded(3, 4)).unwrap();
        let b = Ansatz::new(&spec, &obs, &mut seeded(3, 4)).unwrap();
        let c = Ansatz::new(&spec, &obs, &mut seeded(4, 4)).unwrap();
        assert_eq!(a.random_angles(), b.random_angles());
        assert_ne!(a.random_angles(), c.random_angles());
        assert!(a.random_angles().iter().all(|&t| (0.0..=TAU).contains(&t)));

        let w: Vec<_> = spec.encoding_dims().iter().map(|&d| DMatrix::from_element(d, 3, 0.2)).collect();
        let g1 = a.build(&[0.1, 0.2, 0.3], FeedbackInputs::default(), &w).unwrap();
        let g2 = a.build(&[-0.5, 0.0, 0.9], FeedbackInputs::default(), &w).unwrap();
        let tail = |g: &[GateOp]| g[g.len() - 16..].to_vec();
        assert_eq!(tail(&g1), tail(&g2));
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("L9".parse::<Preset>().is_err());
    }
}
