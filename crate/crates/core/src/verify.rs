//! Self-check of the swapping algebra and the quantum-core invariants.

use serde::Serialize;

use crate::audit::PRINTED_IDENTITIES;
use crate::quantum::{
    apply_local, bell_state, state_equal_up_to_phase, tensor, Amplitude, BellLabel, PauliCode,
};
use crate::swap::{block_state, composite_label, decode_partner, generate_decode_table, swap_decompose, SwapOutcome};

const EXACT: f64 = 1e-12;

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationReport {
    pub printed_identities_exact: usize,
    pub decompositions_exact: usize,
    pub columns: usize,
    pub outcomes_per_column: Vec<usize>,
    pub decode_round_trips: usize,
    pub core_invariants_passed: usize,
    pub core_invariants_total: usize,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn headline(&self) -> String {
        let uniform = self
            .outcomes_per_column
            .first()
            .filter(|&&n| self.outcomes_per_column.iter().all(|&m| m == n))
            .map_or_else(|| format!("{:?}", self.outcomes_per_column), |n| n.to_string());
        format!(
            "{}/16 decompositions exact, {} columns × {} outcomes, {}/16 decode round-trips",
            self.decompositions_exact, self.columns, uniform, self.decode_round_trips
        )
    }
}

/// Independent construction of `|a⟩_{a1a2}|b⟩_{b1b2}` over `(a1, b1, a2, b2)`:
/// tensor in `(a1, a2, b1, b2)` order, then swap the middle qubits.
fn bell_product_by_permutation(outcome: SwapOutcome) -> Vec<Amplitude> {
    let grouped = tensor(&bell_state(outcome.a_side), &bell_state(outcome.b_side))
        .expect("two pairs fit the register");
    (0..16)
        .map(|i| {
            let (q0, q1, q2, q3) = ((i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1);
            // register (a1, b1, a2, b2) -> grouped (a1, a2, b1, b2)
            grouped.amplitudes()[q0 << 3 | q2 << 2 | q1 << 1 | q3]
        })
        .collect()
}

pub fn verify_all() -> VerificationReport {
    let mut report = VerificationReport::default();

    for identity in PRINTED_IDENTITIES {
        let d = swap_decompose(identity.first, identity.second);
        let mut ok = true;
        for outcome in SwapOutcome::all() {
            let printed = identity
                .terms
                .iter()
                .find(|(o, _)| *o == outcome)
                .map_or(0.0, |&(_, s)| 0.5 * f64::from(s));
            let got = d.amplitude(outcome);
            if (got - Amplitude::new(printed, 0.0)).norm() > EXACT {
                ok = false;
                report.failures.push(format!(
                    "identity {}: amplitude at {outcome} is {got}, printed {printed}",
                    identity.name
                ));
            }
        }
        report.printed_identities_exact += usize::from(ok);
    }

    for first in BellLabel::ALL {
        for second in BellLabel::ALL {
            let name = format!("{first}⊗{second}");
            let input = block_state(first, second);
            let d = swap_decompose(first, second);
            let mut ok = true;
            for outcome in SwapOutcome::all() {
                let oracle: Amplitude = bell_product_by_permutation(outcome)
                    .iter()
                    .zip(input.amplitudes())
                    .map(|(b, s)| b.conj() * s)
                    .sum();
                if (d.amplitude(outcome) - oracle).norm() > EXACT {
                    ok = false;
                    report.failures.push(format!(
                        "{name}: amplitude at {outcome} is {}, oracle {oracle}",
                        d.amplitude(outcome)
                    ));
                }
            }
            for (i, (x, y)) in d.reconstruct().iter().zip(input.amplitudes()).enumerate() {
                if (x - y).norm() > EXACT {
                    ok = false;
                    report
                        .failures
                        .push(format!("{name}: re-summed amplitude {i:04b} is {x}, input {y}"));
                }
            }
            let support = d.support();
            if support.len() != 4 || support.iter().any(|&o| (d.probability(o) - 0.25).abs() > EXACT) {
                ok = false;
                report
                    .failures
                    .push(format!("{name}: support {support:?} is not four outcomes of 1/4"));
            }
            report.decompositions_exact += usize::from(ok);
        }
    }

    let table = generate_decode_table();
    let mut covered = [0usize; 16];
    for label in BellLabel::ALL {
        let column = table.column(label);
        for o in &column {
            covered[o.index()] += 1;
        }
        report.outcomes_per_column.push(column.len());
    }
    report.columns = report.outcomes_per_column.iter().filter(|&&n| n > 0).count();
    if covered.iter().any(|&c| c != 1) {
        report
            .failures
            .push(format!("columns do not partition the outcomes: coverage {covered:?}"));
    }

    for a in PauliCode::ALL {
        for b in PauliCode::ALL {
            let label = composite_label(a, b);
            let (got_b, got_a) = (decode_partner(a, label), decode_partner(b, label));
            if got_b == b && got_a == a {
                report.decode_round_trips += 1;
            } else {
                report
                    .failures
                    .push(format!("decode ({a},{b}) via {label} returned ({got_a},{got_b})"));
            }
        }
    }

    check_core(&mut report);
    report
}

fn check_core(report: &mut VerificationReport) {
    let mut check = |name: String, ok: bool| {
        report.core_invariants_total += 1;
        if ok {
            report.core_invariants_passed += 1;
        } else {
            report.failures.push(format!("core invariant failed: {name}"));
        }
    };

    for a in BellLabel::ALL {
        for b in BellLabel::ALL {
            let g = bell_state(a).inner(&bell_state(b)).expect("same size");
            let expected = if a == b { 1.0 } else { 0.0 };
            check(format!("⟨{a}|{b}⟩ = {expected}"), (g - Amplitude::new(expected, 0.0)).norm() < EXACT);
        }
    }

    let probe = block_state(BellLabel::PsiPlus, BellLabel::PhiMinus);
    for op in PauliCode::ALL {
        let m = op.int_matrix();
        let unitary = (0..2).all(|r| {
            (0..2).all(|c| {
                let dot: i32 = (0..2).map(|k| i32::from(m[r][k]) * i32::from(m[c][k])).sum();
                dot == i32::from(r == c)
            })
        });
        check(format!("{op} unitary"), unitary);
        for qubit in 0..4 {
            let once = apply_local(op, qubit, &probe).expect("qubit in range");
            let twice = apply_local(op, qubit, &once).expect("qubit in range");
            check(
                format!("{op} on qubit {qubit} preserves norm"),
                (once.norm_sqr() - 1.0).abs() < EXACT,
            );
            check(
                format!("{op}² on qubit {qubit} is identity up to phase"),
                state_equal_up_to_phase(&twice, &probe, 1e-9).unwrap_or(false),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_verifies() {
        let report = verify_all();
        assert!(report.passed(), "{:#?}", report.failures);
        assert_eq!(
            report.headline(),
            "16/16 decompositions exact, 4 columns × 4 outcomes, 16/16 decode round-trips"
        );
        assert_eq!(report.printed_identities_exact, 4);
        assert_eq!(report.core_invariants_passed, report.core_invariants_total);
    }

    #[test]
    fn permutation_oracle_agrees_with_direct_layout() {
        for o in SwapOutcome::all() {
            let a = bell_product_by_permutation(o);
            let b = crate::swap::bell_pair_basis(o);
            for (x, y) in a.iter().zip(b) {
                assert!((x.re - y).abs() < 1e-15);
            }
        }
    }
}
