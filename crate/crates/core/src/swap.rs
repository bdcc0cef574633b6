//! Entanglement-swapping algebra.
//!
//! A block starts as `|first⟩_{a1b1} ⊗ |second⟩_{a2b2}`. Bell measurements on
//! `(a1, a2)` and `(b1, b2)` land on one of 16 [`SwapOutcome`]s. For any pair of
//! Bell inputs exactly four outcomes are possible, each with probability 1/4,
//! and with `first = Ψ+` the four sets are disjoint. That partition is what lets
//! each party recover the partner's operation from two announced labels.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::quantum::{
    apply_local, bell_state, identify_bell, tensor, Amplitude, BellLabel, PauliCode, PureState,
    StateError,
};

/// Joint result of the two Bell measurements of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SwapOutcome {
    /// Label measured on `(a1, a2)`.
    pub a_side: BellLabel,
    /// Label measured on `(b1, b2)`.
    pub b_side: BellLabel,
}

impl SwapOutcome {
    pub fn new(a_side: BellLabel, b_side: BellLabel) -> Self {
        Self { a_side, b_side }
    }

    pub fn index(self) -> usize {
        self.a_side.index() * 4 + self.b_side.index()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Some(Self::new(
            BellLabel::from_index(index / 4)?,
            BellLabel::from_index(index % 4)?,
        ))
    }

    pub fn all() -> impl Iterator<Item = SwapOutcome> {
        (0..16).filter_map(Self::from_index)
    }
}

impl fmt::Display for SwapOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}_a1a2, {}_b1b2}}", self.a_side, self.b_side)
    }
}

/// Expansion of a 4-qubit block state in the Bell⊗Bell basis of the
/// measured pairs. Signed amplitudes are kept even though only the
/// probabilities are observable.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    amplitudes: [Amplitude; 16],
}

impl OutcomeDistribution {
    pub fn amplitude(&self, outcome: SwapOutcome) -> Amplitude {
        self.amplitudes[outcome.index()]
    }

    pub fn probability(&self, outcome: SwapOutcome) -> f64 {
        self.amplitude(outcome).norm_sqr()
    }

    pub fn total_probability(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Outcomes with probability above the degeneracy threshold, in index order.
    pub fn support(&self) -> Vec<SwapOutcome> {
        SwapOutcome::all()
            .filter(|&o| self.probability(o) > crate::quantum::DEGENERATE_PROBABILITY)
            .collect()
    }

    /// Draws one outcome from a uniform `draw` in `[0, 1)`.
    pub fn sample(&self, draw: f64) -> SwapOutcome {
        let mut cumulative = 0.0;
        let mut last = None;
        for outcome in self.support() {
            cumulative += self.probability(outcome);
            if draw < cumulative {
                return outcome;
            }
            last = Some(outcome);
        }
        last.expect("distribution has non-empty support")
    }

    /// Re-sums `amplitude × |a⟩_{a1a2}|b⟩_{b1b2}` back into a register state.
    pub fn reconstruct(&self) -> Vec<Amplitude> {
        let mut out = vec![Amplitude::new(0.0, 0.0); 16];
        for outcome in SwapOutcome::all() {
            let amp = self.amplitude(outcome);
            for (i, v) in bell_pair_basis(outcome).iter().enumerate() {
                out[i] += amp * v;
            }
        }
        out
    }
}

/// `|a⟩_{a1a2} ⊗ |b⟩_{b1b2}` laid out over the block register `(a1, b1, a2, b2)`.
pub fn bell_pair_basis(outcome: SwapOutcome) -> [f64; 16] {
    let a = outcome.a_side.amplitudes();
    let b = outcome.b_side.amplitudes();
    let mut out = [0.0; 16];
    for (i, v) in out.iter_mut().enumerate() {
        let bit = |q: usize| (i >> (3 - q)) & 1;
        *v = a[bit(0) << 1 | bit(2)] * b[bit(1) << 1 | bit(3)];
    }
    out
}

/// Expands any 4-qubit block state in the Bell⊗Bell basis.
pub fn decompose_block(state: &PureState) -> Result<OutcomeDistribution, StateError> {
    if state.num_qubits() != 4 {
        return Err(StateError::SizeMismatch(state.num_qubits(), 4));
    }
    let mut amplitudes = [Amplitude::new(0.0, 0.0); 16];
    for outcome in SwapOutcome::all() {
        amplitudes[outcome.index()] = bell_pair_basis(outcome)
            .iter()
            .zip(state.amplitudes())
            .map(|(b, s)| s * b)
            .sum();
    }
    Ok(OutcomeDistribution { amplitudes })
}

/// The block state `|first⟩_{a1b1} ⊗ |second⟩_{a2b2}`.
pub fn block_state(first: BellLabel, second: BellLabel) -> PureState {
    tensor(&bell_state(first), &bell_state(second)).expect("two pairs fit the register")
}

pub fn swap_decompose(first: BellLabel, second: BellLabel) -> OutcomeDistribution {
    decompose_block(&block_state(first, second)).expect("block state has four qubits")
}

/// Bell label of the `(a2, b2)` pair after `op_a` on `a2` and `op_b` on `b2`,
/// starting from `|Ψ+⟩`.
pub fn composite_label(op_a: PauliCode, op_b: PauliCode) -> BellLabel {
    let start = bell_state(BellLabel::PsiPlus);
    let after_a = apply_local(op_a, 0, &start).expect("qubit 0 exists");
    let after_b = apply_local(op_b, 1, &after_a).expect("qubit 1 exists");
    identify_bell(&after_b, 1e-9).expect("Pauli actions permute the Bell basis")
}

/// Label a party reports after applying `op` to the second qubit of a pair
/// that would otherwise have measured `label`.
pub fn local_relabel(op: PauliCode, label: BellLabel) -> BellLabel {
    let moved = apply_local(op, 1, &bell_state(label)).expect("qubit 1 exists");
    identify_bell(&moved, 1e-9).expect("Pauli actions permute the Bell basis")
}

/// Second-pair state implied by an outcome, with the first pair prepared in `Ψ+`.
pub fn infer_second_pair(outcome: SwapOutcome) -> BellLabel {
    decode_table().infer(outcome)
}

/// Partner operation consistent with `own` and the inferred composite label.
///
/// The composite map is symmetric in its two arguments, so the same call
/// serves both parties.
pub fn decode_partner(own: PauliCode, inferred: BellLabel) -> PauliCode {
    decode_table().partner(own, inferred)
}

/// Inference structure derived from the swapping algebra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeTable {
    /// Outcome → second-pair label, indexed by [`SwapOutcome::index`].
    infer: Vec<BellLabel>,
    /// Label → the four operation pairs `(op_a, op_b)` that produce it.
    combos: BTreeMap<BellLabel, Vec<(PauliCode, PauliCode)>>,
    /// `partner[own][label]`.
    #[serde(skip)]
    partner: [[Option<PauliCode>; 4]; 4],
}

impl DecodeTable {
    pub fn infer(&self, outcome: SwapOutcome) -> BellLabel {
        self.infer[outcome.index()]
    }

    pub fn combos(&self, label: BellLabel) -> &[(PauliCode, PauliCode)] {
        self.combos.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn partner(&self, own: PauliCode, inferred: BellLabel) -> PauliCode {
        self.partner[own.index()][inferred.index()].expect("decode map is total")
    }

    /// Outcomes possible for a given second-pair label.
    pub fn column(&self, label: BellLabel) -> Vec<SwapOutcome> {
        SwapOutcome::all().filter(|&o| self.infer(o) == label).collect()
    }

    pub fn composite(&self, op_a: PauliCode, op_b: PauliCode) -> BellLabel {
        self.combos
            .iter()
            .find(|(_, set)| set.contains(&(op_a, op_b)))
            .map(|(&l, _)| l)
            .expect("combos cover all 16 operation pairs")
    }
}

pub fn generate_decode_table() -> DecodeTable {
    let mut infer = vec![None; 16];
    for second in BellLabel::ALL {
        for outcome in swap_decompose(BellLabel::PsiPlus, second).support() {
            assert!(
                infer[outcome.index()].replace(second).is_none(),
                "swap columns overlap at {outcome}"
            );
        }
    }
    let infer: Vec<BellLabel> = infer
        .into_iter()
        .map(|l| l.expect("swap columns cover every outcome"))
        .collect();

    let mut combos: BTreeMap<BellLabel, Vec<(PauliCode, PauliCode)>> = BTreeMap::new();
    let mut partner = [[None; 4]; 4];
    for op_a in PauliCode::ALL {
        for op_b in PauliCode::ALL {
            let label = composite_label(op_a, op_b);
            combos.entry(label).or_default().push((op_a, op_b));
            partner[op_a.index()][label.index()] = Some(op_b);
        }
    }
    DecodeTable { infer, combos, partner }
}

/// Shared, lazily built table.
pub fn decode_table() -> &'static DecodeTable {
    static TABLE: OnceLock<DecodeTable> = OnceLock::new();
    TABLE.get_or_init(generate_decode_table)
}
