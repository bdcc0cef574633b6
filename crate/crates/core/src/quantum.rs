//! Dense state vectors for 2- and 4-qubit registers.
//!
//! Qubit 0 is the most significant bit of a basis index. Inside a protocol
//! block the register order is `(a1, b1, a2, b2)`, see [`block`].
//!
//! ```text
//! |Φ±⟩ = (|00⟩ ± |11⟩) / √2
//! |Ψ±⟩ = (|01⟩ ± |10⟩) / √2
//! ```

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single complex coefficient.
pub type Amplitude = Complex64;

/// Largest register this crate simulates.
pub const MAX_QUBITS: usize = 4;

/// Tolerance on the squared norm of a constructed state.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Projections with less weight than this are treated as impossible.
pub const DEGENERATE_PROBABILITY: f64 = 1e-12;

/// Qubit positions of one protocol block.
pub mod block {
    pub const A1: usize = 0;
    pub const B1: usize = 1;
    pub const A2: usize = 2;
    pub const B2: usize = 3;
    /// Pair Alice measures.
    pub const ALICE_PAIR: (usize, usize) = (A1, A2);
    /// Pair Bob measures.
    pub const BOB_PAIR: (usize, usize) = (B1, B2);
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit limit")]
    TooLarge(usize),
    #[error("expected {expected} amplitudes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("amplitude {index} is not finite")]
    NonFinite { index: usize },
    #[error("squared norm {0} is not 1")]
    NotNormalized(f64),
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("measured pair uses qubit {0} twice")]
    DuplicateQubit(usize),
    #[error("register sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

/// Normalized pure state over at most [`MAX_QUBITS`] qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Amplitude>,
}

impl PureState {
    pub fn from_amplitudes(amplitudes: Vec<Amplitude>) -> Result<Self, StateError> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(StateError::Length {
                expected: len.next_power_of_two().max(2),
                got: len,
            });
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(StateError::TooLarge(num_qubits));
        }
        if let Some(index) = amplitudes
            .iter()
            .position(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(StateError::NonFinite { index });
        }
        let state = Self { num_qubits, amplitudes };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Real-amplitude convenience constructor.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self, StateError> {
        Self::from_amplitudes(amplitudes.iter().map(|&re| Amplitude::new(re, 0.0)).collect())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self, StateError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(StateError::TooLarge(num_qubits));
        }
        let dim = 1 << num_qubits;
        if index >= dim {
            return Err(StateError::QubitOutOfRange { qubit: index, num_qubits });
        }
        let mut amplitudes = vec![Amplitude::new(0.0, 0.0); dim];
        amplitudes[index] = Amplitude::new(1.0, 0.0);
        Ok(Self { num_qubits, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Amplitude, StateError> {
        if self.num_qubits != other.num_qubits {
            return Err(StateError::SizeMismatch(self.num_qubits, other.num_qubits));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies every amplitude by `factor`. Callers keep `|factor| = 1`.
    pub fn scaled(&self, factor: Amplitude) -> PureState {
        PureState {
            num_qubits: self.num_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), StateError> {
        if qubit >= self.num_qubits {
            return Err(StateError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Bit mask of `qubit` inside a basis index.
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn amplitudes(self) -> [f64; 4] {
        let s = FRAC_1_SQRT_2;
        match self {
            BellLabel::PhiPlus => [s, 0.0, 0.0, s],
            BellLabel::PhiMinus => [s, 0.0, 0.0, -s],
            BellLabel::PsiPlus => [0.0, s, s, 0.0],
            BellLabel::PsiMinus => [0.0, s, -s, 0.0],
        }
    }

    /// Name used on the wire and in documents.
    pub fn name(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "PhiPlus",
            BellLabel::PhiMinus => "PhiMinus",
            BellLabel::PsiPlus => "PsiPlus",
            BellLabel::PsiMinus => "PsiMinus",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "Φ+",
            BellLabel::PhiMinus => "Φ-",
            BellLabel::PsiPlus => "Ψ+",
            BellLabel::PsiMinus => "Ψ-",
        }
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// The four local encoding operations and their two-bit codes.
///
/// Matrices are kept exactly as defined for the protocol: `U1 = diag(-1, 1)`
/// and `U3 = |0⟩⟨1| - |1⟩⟨0|`. They differ from textbook `Z` and `iY` only by
/// global phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliCode {
    U0,
    U1,
    U2,
    U3,
}

impl PauliCode {
    pub const ALL: [PauliCode; 4] = [PauliCode::U0, PauliCode::U1, PauliCode::U2, PauliCode::U3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Exact integer matrix, row-major: `m[row][col] = ⟨row|U|col⟩`.
    pub fn int_matrix(self) -> [[i8; 2]; 2] {
        match self {
            PauliCode::U0 => [[1, 0], [0, 1]],
            PauliCode::U1 => [[-1, 0], [0, 1]],
            PauliCode::U2 => [[0, 1], [1, 0]],
            PauliCode::U3 => [[0, 1], [-1, 0]],
        }
    }

    pub fn matrix(self) -> [[Amplitude; 2]; 2] {
        let m = self.int_matrix();
        let c = |v: i8| Amplitude::new(f64::from(v), 0.0);
        [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]]
    }

    /// Two-bit code, high bit first.
    pub fn bits(self) -> (bool, bool) {
        let i = self.index();
        (i & 2 != 0, i & 1 != 0)
    }

    pub fn from_bits(high: bool, low: bool) -> Self {
        Self::ALL[(usize::from(high) << 1) | usize::from(low)]
    }

    /// Code as printed, e.g. `"01"`.
    pub fn code(self) -> &'static str {
        ["00", "01", "10", "11"][self.index()]
    }
}

impl fmt::Display for PauliCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.index())
    }
}

pub fn bell_state(label: BellLabel) -> PureState {
    PureState {
        num_qubits: 2,
        amplitudes: label
            .amplitudes()
            .iter()
            .map(|&re| Amplitude::new(re, 0.0))
            .collect(),
    }
}

/// Kronecker product; `right`'s qubits follow `left`'s.
pub fn tensor(left: &PureState, right: &PureState) -> Result<PureState, StateError> {
    let num_qubits = left.num_qubits + right.num_qubits;
    if num_qubits > MAX_QUBITS {
        return Err(StateError::TooLarge(num_qubits));
    }
    let amplitudes = left
        .amplitudes
        .iter()
        .flat_map(|l| right.amplitudes.iter().map(move |r| l * r))
        .collect();
    Ok(PureState { num_qubits, amplitudes })
}

/// Applies `op` to one qubit, leaving the rest untouched.
pub fn apply_local(op: PauliCode, qubit: usize, state: &PureState) -> Result<PureState, StateError> {
    state.check_qubit(qubit)?;
    let mask = state.mask(qubit);
    let m = op.matrix();
    let mut out = state.amplitudes.clone();
    for i0 in (0..out.len()).filter(|i| i & mask == 0) {
        let i1 = i0 | mask;
        let (v0, v1) = (state.amplitudes[i0], state.amplitudes[i1]);
        out[i0] = m[0][0] * v0 + m[0][1] * v1;
        out[i1] = m[1][0] * v0 + m[1][1] * v1;
    }
    Ok(PureState {
        num_qubits: state.num_qubits,
        amplitudes: out,
    })
}

/// True iff `|⟨a|b⟩| ≥ 1 - tol`.
pub fn state_equal_up_to_phase(a: &PureState, b: &PureState, tol: f64) -> Result<bool, StateError> {
    Ok(a.inner(b)?.norm() >= 1.0 - tol)
}

/// Result of projecting a pair onto one Bell state.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub probability: f64,
    /// Renormalized post-measurement state; `None` for a degenerate projection.
    pub residual: Option<PureState>,
}

fn check_pair(state: &PureState, pair: (usize, usize)) -> Result<(), StateError> {
    state.check_qubit(pair.0)?;
    state.check_qubit(pair.1)?;
    if pair.0 == pair.1 {
        return Err(StateError::DuplicateQubit(pair.0));
    }
    Ok(())
}

/// Projects qubits `pair = (first, second)` onto the Bell state `label`,
/// with `first` playing the role of the left qubit in the Bell definition.
pub fn bell_project(
    state: &PureState,
    pair: (usize, usize),
    label: BellLabel,
) -> Result<Projection, StateError> {
    check_pair(state, pair)?;
    let (m0, m1) = (state.mask(pair.0), state.mask(pair.1));
    let bell = label.amplitudes();
    let slot = |rest: usize, b: usize| {
        rest | if b & 2 != 0 { m0 } else { 0 } | if b & 1 != 0 { m1 } else { 0 }
    };
    let mut projected = vec![Amplitude::new(0.0, 0.0); state.amplitudes.len()];
    for rest in (0..state.amplitudes.len()).filter(|i| i & (m0 | m1) == 0) {
        let overlap: Amplitude = (0..4).map(|b| state.amplitudes[slot(rest, b)] * bell[b]).sum();
        for (b, &coeff) in bell.iter().enumerate() {
            projected[slot(rest, b)] = overlap * coeff;
        }
    }
    let probability: f64 = projected.iter().map(|a| a.norm_sqr()).sum();
    let residual = (probability > DEGENERATE_PROBABILITY).then(|| {
        let scale = probability.sqrt().recip();
        PureState {
            num_qubits: state.num_qubits,
            amplitudes: projected.iter().map(|a| a * scale).collect(),
        }
    });
    Ok(Projection { probability, residual })
}

/// Samples a Bell-basis measurement of `pair`.
///
/// Draws exactly one `f64` from `rng` per call.
pub fn bell_measure<R: Rng + ?Sized>(
    state: &PureState,
    pair: (usize, usize),
    rng: &mut R,
) -> Result<(BellLabel, PureState), StateError> {
    let projections = BellLabel::ALL
        .iter()
        .map(|&label| bell_project(state, pair, label).map(|p| (label, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut fallback = None;
    for (label, projection) in projections {
        if let Some(residual) = projection.residual {
            cumulative += projection.probability;
            if draw < cumulative {
                return Ok((label, residual));
            }
            fallback = Some((label, residual));
        }
    }
    // Rounding can leave the total a hair under 1.
    Ok(fallback.expect("a normalized state has a non-degenerate Bell projection"))
}

/// Label `L` with `|state⟩ = e^{iθ}|L⟩` for a 2-qubit Bell state, if any.
pub fn identify_bell(state: &PureState, tol: f64) -> Option<BellLabel> {
    BellLabel::ALL
        .into_iter()
        .find(|&l| state_equal_up_to_phase(state, &bell_state(l), tol).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = FRAC_1_SQRT_2;

    fn close(a: &PureState, expected: &[f64]) -> bool {
        a.amplitudes()
            .iter()
            .zip(expected)
            .all(|(x, &e)| (x.re - e).abs() < 1e-12 && x.im.abs() < 1e-12)
    }

    #[test]
    fn bell_state_amplitudes() {
        assert!(close(&bell_state(BellLabel::PsiPlus), &[0.0, H, H, 0.0]));
        assert!(close(&bell_state(BellLabel::PhiMinus), &[H, 0.0, 0.0, -H]));
        for l in BellLabel::ALL {
            assert!((bell_state(l).norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bell_gram_matrix_is_identity() {
        for a in BellLabel::ALL {
            for b in BellLabel::ALL {
                let g = bell_state(a).inner(&bell_state(b)).unwrap();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((g - Amplitude::new(expected, 0.0)).norm() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let psi = bell_state(BellLabel::PsiPlus);
        let t = tensor(&psi, &psi).unwrap();
        assert_eq!(t.num_qubits(), 4);
        for (i, a) in t.amplitudes().iter().enumerate() {
            let expected = if [0b0101, 0b0110, 0b1001, 0b1010].contains(&i) { 0.5 } else { 0.0 };
            assert!((a.re - expected).abs() < 1e-12, "index {i:04b}");
        }
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        assert_eq!(tensor(&zero, &one).unwrap(), PureState::basis(2, 0b01).unwrap());
        assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_rejects_oversized_register() {
        let t = tensor(&bell_state(BellLabel::PhiPlus), &bell_state(BellLabel::PhiPlus)).unwrap();
        let q = PureState::basis(1, 0).unwrap();
        assert_eq!(tensor(&t, &q), Err(StateError::TooLarge(5)));
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(PureState::from_real(&[1.0, 0.0, 0.0]), Err(StateError::Length { .. })));
        assert!(matches!(PureState::from_real(&[1.0, 1.0]), Err(StateError::NotNormalized(_))));
        assert!(matches!(
            PureState::from_real(&[f64::NAN, 0.0]),
            Err(StateError::NonFinite { index: 0 })
        ));
        assert!(PureState::from_real(&[0.6, 0.8]).is_ok());
    }

    #[test]
    fn local_ops_on_psi_plus_second_qubit() {
        let psi = bell_state(BellLabel::PsiPlus);
        let expected = [
            BellLabel::PsiPlus,
            BellLabel::PsiMinus,
            BellLabel::PhiPlus,
            BellLabel::PhiMinus,
        ];
        for (op, label) in PauliCode::ALL.into_iter().zip(expected) {
            let out = apply_local(op, 1, &psi).unwrap();
            assert!(state_equal_up_to_phase(&out, &bell_state(label), 1e-9).unwrap(), "{op}");
        }
        // U2 gives Φ+ exactly, not just up to phase.
        assert!(close(&apply_local(PauliCode::U2, 1, &psi).unwrap(), &[H, 0.0, 0.0, H]));
        assert_eq!(apply_local(PauliCode::U0, 0, &psi).unwrap(), psi);
    }

    #[test]
    fn apply_local_rejects_bad_qubit() {
        let psi = bell_state(BellLabel::PsiPlus);
        assert_eq!(
            apply_local(PauliCode::U1, 2, &psi),
            Err(StateError::QubitOutOfRange { qubit: 2, num_qubits: 2 })
        );
    }

    #[test]
    fn pauli_matrices_unitary_exactly() {
        for op in PauliCode::ALL {
            let m = op.int_matrix();
            for r in 0..2 {
                for c in 0..2 {
                    let dot: i32 = (0..2).map(|k| i32::from(m[r][k]) * i32::from(m[c][k])).sum();
                    assert_eq!(dot, i32::from(r == c), "{op}");
                }
            }
        }
    }

    #[test]
    fn codes_round_trip() {
        assert_eq!(PauliCode::U1.code(), "01");
        assert_eq!(PauliCode::U2.bits(), (true, false));
        for op in PauliCode::ALL {
            let (h, l) = op.bits();
            assert_eq!(PauliCode::from_bits(h, l), op);
        }
    }

    #[test]
    fn phase_comparison() {
        let s = bell_state(BellLabel::PsiPlus);
        assert!(state_equal_up_to_phase(&s, &s, 1e-9).unwrap());
        assert!(state_equal_up_to_phase(&s, &s.scaled(Amplitude::new(-1.0, 0.0)), 1e-9).unwrap());
        assert!(!state_equal_up_to_phase(&s, &bell_state(BellLabel::PsiMinus), 1e-9).unwrap());
        let big = tensor(&s, &s).unwrap();
        assert_eq!(state_equal_up_to_phase(&s, &big, 1e-9), Err(StateError::SizeMismatch(2, 4)));
    }

    #[test]
    fn projection_examples() {
        let psi = bell_state(BellLabel::PsiPlus);
        let block = tensor(&psi, &psi).unwrap();
        let p = bell_project(&block, block::ALICE_PAIR, BellLabel::PhiPlus).unwrap();
        assert!((p.probability - 0.25).abs() < 1e-12);

        let phi = bell_state(BellLabel::PhiPlus);
        let p = bell_project(&phi, (0, 1), BellLabel::PhiPlus).unwrap();
        assert!((p.probability - 1.0).abs() < 1e-12);
        assert!(state_equal_up_to_phase(p.residual.as_ref().unwrap(), &phi, 1e-12).unwrap());
        assert!(close(p.residual.as_ref().unwrap(), &[H, 0.0, 0.0, H]));

        let p = bell_project(&phi, (0, 1), BellLabel::PsiPlus).unwrap();
        assert!(p.probability < 1e-12);
        assert!(p.residual.is_none());

        assert_eq!(
            bell_project(&block, (1, 1), BellLabel::PhiPlus),
            Err(StateError::DuplicateQubit(1))
        );
    }

    #[test]
    fn measurement_of_eigenstate_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = bell_state(BellLabel::PhiMinus);
        let block = tensor(&phi, &bell_state(BellLabel::PsiPlus)).unwrap();
        for _ in 0..50 {
            let (label, residual) = bell_measure(&block, (0, 1), &mut rng).unwrap();
            assert_eq!(label, BellLabel::PhiMinus);
            assert!(state_equal_up_to_phase(&residual, &block, 1e-12).unwrap());
        }
    }

    #[test]
    fn measurement_is_seed_deterministic() {
        let psi = bell_state(BellLabel::PsiPlus);
        let block = tensor(&psi, &psi).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| bell_measure(&block, block::ALICE_PAIR, &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn identify_bell_labels() {
        for l in BellLabel::ALL {
            let s = bell_state(l).scaled(Amplitude::new(0.0, 1.0));
            assert_eq!(identify_bell(&s, 1e-9), Some(l));
        }
        assert_eq!(identify_bell(&PureState::basis(2, 0).unwrap(), 1e-9), None);
    }
}
