//! The correspondence table and swapping identities as originally printed,
//! kept as fixtures and compared cell by cell against the derived algebra.

use serde::Serialize;

use crate::quantum::{BellLabel, PauliCode};
use crate::swap::{composite_label, decode_table, swap_decompose, SwapOutcome};

use BellLabel::{PhiMinus, PhiPlus, PsiMinus, PsiPlus};
use PauliCode::{U0, U1, U2, U3};

/// One printed operation annotation, e.g. `u_1^A(01)`.
#[derive(Debug, Clone, Copy)]
pub struct PrintedOp {
    pub op: PauliCode,
    pub bits: &'static str,
}

const fn op(op: PauliCode, bits: &'static str) -> PrintedOp {
    PrintedOp { op, bits }
}

const fn out(a: BellLabel, b: BellLabel) -> SwapOutcome {
    SwapOutcome { a_side: a, b_side: b }
}

/// Transcription of the published correspondence table, typos included.
pub struct PrintedTable {
    /// `outcomes[row][column]`.
    pub outcomes: [[SwapOutcome; 4]; 4],
    /// Initial block state heading each column, `(a1b1 pair, a2b2 pair)`.
    pub initial_states: [(BellLabel, BellLabel); 4],
    /// `operations[row][column] = (Alice, Bob)`.
    pub operations: [[(PrintedOp, PrintedOp); 4]; 4],
}

pub const PRINTED_TABLE: PrintedTable = PrintedTable {
    outcomes: [
        [out(PhiPlus, PhiPlus), out(PsiMinus, PsiPlus), out(PsiPlus, PhiPlus), out(PsiPlus, PhiMinus)],
        [out(PsiMinus, PsiMinus), out(PhiPlus, PhiMinus), out(PsiMinus, PhiMinus), out(PsiMinus, PhiPlus)],
        [out(PsiPlus, PsiPlus), out(PhiMinus, PhiPlus), out(PhiPlus, PsiPlus), out(PhiPlus, PsiMinus)],
        [out(PhiMinus, PhiMinus), out(PsiPlus, PsiMinus), out(PhiMinus, PsiMinus), out(PhiMinus, PsiPlus)],
    ],
    initial_states: [
        (PsiPlus, PsiPlus),
        (PsiPlus, PsiMinus),
        (PsiPlus, PhiPlus),
        (PsiPlus, PhiMinus),
    ],
    operations: [
        [
            (op(U0, "00"), op(U0, "00")),
            (op(U1, "01"), op(U0, "00")),
            (op(U2, "10"), op(U0, "00")),
            (op(U3, "11"), op(U0, "00")),
        ],
        [
            (op(U1, "00"), op(U1, "00")),
            (op(U0, "00"), op(U1, "01")),
            (op(U0, "00"), op(U2, "10")),
            (op(U0, "00"), op(U3, "11")),
        ],
        [
            (op(U2, "00"), op(U2, "00")),
            (op(U2, "10"), op(U3, "11")),
            (op(U1, "01"), op(U3, "11")),
            (op(U1, "01"), op(U2, "10")),
        ],
        [
            (op(U3, "00"), op(U3, "00")),
            (op(U3, "11"), op(U2, "10")),
            (op(U3, "11"), op(U1, "01")),
            (op(U2, "10"), op(U1, "01")),
        ],
    ],
};

/// A printed swapping identity: `|first⟩⊗|second⟩ = ½ Σ sign · |a⟩|b⟩`.
#[derive(Debug, Clone, Copy)]
pub struct PrintedIdentity {
    pub name: &'static str,
    pub first: BellLabel,
    pub second: BellLabel,
    pub terms: [(SwapOutcome, i8); 4],
}

pub const PRINTED_IDENTITIES: [PrintedIdentity; 4] = [
    PrintedIdentity {
        name: "Ψ+⊗Ψ+",
        first: PsiPlus,
        second: PsiPlus,
        terms: [
            (out(PsiPlus, PsiPlus), 1),
            (out(PsiMinus, PsiMinus), -1),
            (out(PhiPlus, PhiPlus), 1),
            (out(PhiMinus, PhiMinus), -1),
        ],
    },
    PrintedIdentity {
        name: "Ψ+⊗Ψ-",
        first: PsiPlus,
        second: PsiMinus,
        terms: [
            (out(PsiPlus, PsiMinus), 1),
            (out(PsiMinus, PsiPlus), -1),
            (out(PhiPlus, PhiMinus), -1),
            (out(PhiMinus, PhiPlus), 1),
        ],
    },
    PrintedIdentity {
        name: "Ψ+⊗Φ+",
        first: PsiPlus,
        second: PhiPlus,
        terms: [
            (out(PsiPlus, PhiPlus), 1),
            (out(PsiMinus, PhiMinus), -1),
            (out(PhiPlus, PsiPlus), 1),
            (out(PhiMinus, PsiMinus), -1),
        ],
    },
    PrintedIdentity {
        name: "Ψ+⊗Φ-",
        first: PsiPlus,
        second: PhiMinus,
        terms: [
            (out(PsiPlus, PhiMinus), 1),
            (out(PsiMinus, PhiPlus), -1),
            (out(PhiPlus, PsiMinus), -1),
            (out(PhiMinus, PsiPlus), 1),
        ],
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Outcomes,
    InitialStates,
    Operations,
}

/// A printed cell that disagrees with the derived table. Rows and columns
/// are 1-based as printed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub section: Section,
    pub row: usize,
    pub column: usize,
    pub field: String,
    pub printed: String,
    pub derived: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub cells_checked: usize,
    pub discrepancies: Vec<Discrepancy>,
}

impl AuditReport {
    pub fn in_section(&self, section: Section) -> impl Iterator<Item = &Discrepancy> {
        self.discrepancies.iter().filter(move |d| d.section == section)
    }

    /// Distinct `(section, row, column)` cells with at least one discrepancy.
    pub fn flagged_cells(&self) -> Vec<(Section, usize, usize)> {
        let mut cells: Vec<_> = self
            .discrepancies
            .iter()
            .map(|d| (d.section, d.row, d.column))
            .collect();
        cells.sort();
        cells.dedup();
        cells
    }
}

pub fn audit_printed_table() -> AuditReport {
    audit_table(&PRINTED_TABLE)
}

pub fn audit_table(printed: &PrintedTable) -> AuditReport {
    let table = decode_table();
    let mut discrepancies = Vec::new();
    let mut cells_checked = 0;
    let mut flag = |section, row, column, field: &str, printed: String, derived: String| {
        if printed != derived {
            discrepancies.push(Discrepancy {
                section,
                row: row + 1,
                column: column + 1,
                field: field.to_string(),
                printed,
                derived,
            });
        }
    };

    for (column, &(first, second)) in printed.initial_states.iter().enumerate() {
        cells_checked += 1;
        flag(
            Section::InitialStates,
            0,
            column,
            "first_pair",
            first.name().to_string(),
            PsiPlus.name().to_string(),
        );
        let mut printed_support: Vec<SwapOutcome> = (0..4).map(|r| printed.outcomes[r][column]).collect();
        printed_support.sort();
        let mut derived_support = swap_decompose(first, second).support();
        derived_support.sort();
        flag(
            Section::InitialStates,
            0,
            column,
            "support",
            format_outcomes(&printed_support),
            format_outcomes(&derived_support),
        );
    }

    for row in 0..4 {
        for column in 0..4 {
            let expected = printed.initial_states[column].1;
            cells_checked += 2;

            let outcome = printed.outcomes[row][column];
            flag(
                Section::Outcomes,
                row,
                column,
                "second_pair",
                expected.name().to_string(),
                table.infer(outcome).name().to_string(),
            );

            let (alice, bob) = printed.operations[row][column];
            flag(
                Section::Operations,
                row,
                column,
                "composite",
                expected.name().to_string(),
                composite_label(alice.op, bob.op).name().to_string(),
            );
            flag(
                Section::Operations,
                row,
                column,
                "alice_bits",
                format!("{}({})", alice.op, alice.bits),
                format!("{}({})", alice.op, alice.op.code()),
            );
            flag(
                Section::Operations,
                row,
                column,
                "bob_bits",
                format!("{}({})", bob.op, bob.bits),
                format!("{}({})", bob.op, bob.op.code()),
            );
        }
    }

    AuditReport {
        cells_checked,
        discrepancies,
    }
}

fn format_outcomes(outcomes: &[SwapOutcome]) -> String {
    outcomes
        .iter()
        .map(|o| format!("{}/{}", o.a_side.name(), o.b_side.name()))
        .collect::<Vec<_>>()
        .join(",")
}
