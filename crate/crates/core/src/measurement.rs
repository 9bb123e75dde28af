//! Observable sets and evaluation of the measurement vector `M_t`.
//!
//! Canonical order is axis-major (X, Y, Z), then correlator order, then
//! ascending qubit tuples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HqrcError, Result};
use crate::statevector::{Axis, PauliString, Shots, StateVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    #[default]
    AllToAll,
    /// Pairs are the graph edges; triples are its triangles.
    Graph { edges: Vec<(usize, usize)> },
    /// Explicit list of qubit groups used as correlators (order >= 2).
    Explicit { groups: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementScheme {
    pub axes: Vec<Axis>,
    pub max_order: usize,
    pub connectivity: Connectivity,
}

impl Default for MeasurementScheme {
    fn default() -> Self {
        Self {
            axes: Axis::ALL.to_vec(),
            max_order: 2,
            connectivity: Connectivity::AllToAll,
        }
    }
}

impl MeasurementScheme {
    pub fn all_to_all(max_order: usize) -> Self {
        Self {
            max_order,
            ..Self::default()
        }
    }

    fn sorted_axes(&self) -> Vec<Axis> {
        let mut axes = self.axes.clone();
        axes.sort();
        axes.dedup();
        axes
    }

    /// Qubit tuples measured per axis, in canonical order.
    fn qubit_groups(&self, n_qubits: usize) -> Result<Vec<Vec<usize>>> {
        if !(1..=3).contains(&self.max_order) {
            return Err(HqrcError::config(format!(
                "correlator order must be 1, 2 or 3, got {}",
                self.max_order
            )));
        }
        let mut groups: Vec<Vec<usize>> = (0..n_qubits).map(|q| vec![q]).collect();
        let mut higher: Vec<Vec<usize>> = match &self.connectivity {
            Connectivity::AllToAll => {
                let mut v = Vec::new();
                for order in 2..=self.max_order {
                    v.extend(combinations(n_qubits, order));
                }
                v
            }
            Connectivity::Graph { edges } => {
                let mut pairs = Vec::new();
                for &(a, b) in edges {
                    if a >= n_qubits || b >= n_qubits || a == b {
                        return Err(HqrcError::config(format!(
                            "connectivity edge ({a}, {b}) invalid for {n_qubits} qubits"
                        )));
                    }
                    pairs.push(vec![a.min(b), a.max(b)]);
                }
                pairs.sort();
                pairs.dedup();
                let mut v = Vec::new();
                if self.max_order >= 2 {
                    v.extend(pairs.iter().cloned());
                }
                if self.max_order >= 3 {
                    let has = |a: usize, b: usize| pairs.binary_search(&vec![a, b]).is_ok();
                    v.extend(
                        combinations(n_qubits, 3)
                            .into_iter()
                            .filter(|t| has(t[0], t[1]) && has(t[0], t[2]) && has(t[1], t[2])),
                    );
                }
                v
            }
            Connectivity::Explicit { groups } => {
                let mut v = Vec::new();
                for g in groups {
                    let mut g = g.clone();
                    g.sort_unstable();
                    if g.len() < 2 || g.len() > self.max_order {
                        return Err(HqrcError::config(format!(
                            "correlator group {g:?} outside order 2..={}",
                            self.max_order
                        )));
                    }
                    if g.windows(2).any(|w| w[0] == w[1]) || g.iter().any(|&q| q >= n_qubits) {
                        return Err(HqrcError::config(format!("invalid correlator group {g:?}")));
                    }
                    v.push(g);
                }
                v.sort();
                v.dedup();
                v
            }
        };
        higher.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        groups.extend(higher);
        Ok(groups)
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Ordered observable list for a register, built once per run.
#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    n_qubits: usize,
    axes: Vec<Axis>,
    per_axis: usize,
    list: Vec<PauliString>,
}

impl Observables {
    pub fn new(n_qubits: usize, scheme: &MeasurementScheme) -> Result<Self> {
        let axes = scheme.sorted_axes();
        if axes.is_empty() {
            return Err(HqrcError::config("measurement scheme needs at least one axis"));
        }
        let groups = scheme.qubit_groups(n_qubits)?;
        let mut list = Vec::with_capacity(axes.len() * groups.len());
        for &axis in &axes {
            for g in &groups {
                list.push(PauliString::new(axis, g.clone())?);
            }
        }
        Ok(Self {
            n_qubits,
            axes,
            per_axis: groups.len(),
            list,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn as_slice(&self) -> &[PauliString] {
        &self.list
    }

    /// Position of the single-qubit expectation `⟨P_q⟩`, if measured.
    pub fn single_index(&self, axis: Axis, qubit: usize) -> Option<usize> {
        let block = self.axes.iter().position(|&a| a == axis)?;
        (qubit < self.n_qubits).then_some(block * self.per_axis + qubit)
    }

    /// Evaluate `M_t`. Exact mode reads amplitudes; finite mode draws one count
    /// table per axis and derives every same-axis observable from it.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        state: &StateVector,
        shots: Shots,
        rng: &mut R,
    ) -> Result<MeasurementVector> {
        if state.n_qubits() != self.n_qubits {
            return Err(HqrcError::config(format!(
                "observables built for {} qubits, state has {}",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        let values = match shots {
            Shots::Exact => self
                .list
                .iter()
                .map(|p| state.expectation_mask(p.axis(), p.mask()))
                .collect(),
            Shots::Finite(n) => {
                let mut values = Vec::with_capacity(self.list.len());
                for (block, &axis) in self.axes.iter().enumerate() {
                    let table = state.sample_basis(axis, n, rng)?;
                    let obs = &self.list[block * self.per_axis..(block + 1) * self.per_axis];
                    values.extend(obs.iter().map(|p| table.estimate_mask(p.mask(), n)));
                }
                values
            }
        };
        Ok(MeasurementVector { values })
    }
}

/// Canonically ordered observable list for `n_qubits` under `scheme`.
pub fn build_observables(n_qubits: usize, scheme: &MeasurementScheme) -> Result<Vec<PauliString>> {
    Ok(Observables::new(n_qubits, scheme)?.list)
}

/// Evaluate the measurement vector of `state` under `scheme`.
pub fn measure_vector<R: Rng + ?Sized>(
    state: &StateVector,
    scheme: &MeasurementScheme,
    shots: Shots,
    rng: &mut R,
) -> Result<MeasurementVector> {
    Observables::new(state.n_qubits(), scheme)?.measure(state, shots, rng)
}

/// All-to-all size `3N + 3·C(N,2) [+ 3·C(N,3)]` for the three Pauli axes.
pub fn all_to_all_size(n_qubits: usize, max_order: usize) -> usize {
    let choose = |n: usize, k: usize| -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    };
    3 * (1..=max_order).map(|k| choose(n_qubits, k)).sum::<usize>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
}

impl MeasurementVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
