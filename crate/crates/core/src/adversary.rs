//! What a transcript-only eavesdropper learns.
//!
//! Eve sees the public announcements and metadata and nothing else. For each
//! block the likelihood of what she saw given the two operations comes from
//! the analytic swap distribution of the composite label, so the posterior
//! and all information measures are exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Side;
use crate::protocol::{block_outcome, Transcript};
use crate::quantum::{BellLabel, PauliCode};
use crate::stats::{empirical_mutual_information, entropy, mutual_information};
use crate::swap::{decode_table, swap_decompose, OutcomeDistribution, SwapOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("prior sums to {0}, not 1")]
    PriorNotNormalized(f64),
    #[error("prior has a negative or non-finite entry")]
    PriorInvalid,
}

/// Which sides announced in a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Both,
    AliceOnly,
    BobOnly,
    Neither,
}

impl Pattern {
    pub fn of(a: bool, b: bool) -> Self {
        match (a, b) {
            (true, true) => Pattern::Both,
            (true, false) => Pattern::AliceOnly,
            (false, true) => Pattern::BobOnly,
            (false, false) => Pattern::Neither,
        }
    }

    /// Every view Eve could see under this pattern.
    pub fn views(self) -> Vec<BlockView> {
        let labels = || BellLabel::ALL.into_iter();
        match self {
            Pattern::Both => labels()
                .flat_map(|a| labels().map(move |b| BlockView { alice: Some(a), bob: Some(b) }))
                .collect(),
            Pattern::AliceOnly => labels().map(|a| BlockView { alice: Some(a), bob: None }).collect(),
            Pattern::BobOnly => labels().map(|b| BlockView { alice: None, bob: Some(b) }).collect(),
            Pattern::Neither => vec![BlockView { alice: None, bob: None }],
        }
    }

    fn view_index(self, outcome: SwapOutcome) -> usize {
        match self {
            Pattern::Both => outcome.index(),
            Pattern::AliceOnly => outcome.a_side.index(),
            Pattern::BobOnly => outcome.b_side.index(),
            Pattern::Neither => 0,
        }
    }
}

/// Announced labels of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockView {
    pub alice: Option<BellLabel>,
    pub bob: Option<BellLabel>,
}

impl BlockView {
    pub fn pattern(&self) -> Pattern {
        Pattern::of(self.alice.is_some(), self.bob.is_some())
    }

    /// `P(view | operations)` from the composite's outcome distribution.
    fn likelihood(&self, distribution: &OutcomeDistribution) -> f64 {
        let matches = |o: &SwapOutcome| {
            self.alice.is_none_or(|a| a == o.a_side) && self.bob.is_none_or(|b| b == o.b_side)
        };
        SwapOutcome::all()
            .filter(matches)
            .map(|o| distribution.probability(o))
            .sum()
    }
}

/// Eve's entire knowledge: the public transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct EveView {
    transcript: Transcript,
}

impl EveView {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn blocks(&self) -> Vec<(u32, BlockView)> {
        (1..=self.transcript.usable_blocks() as u32)
            .map(|k| {
                (
                    k,
                    BlockView {
                        alice: self.transcript.measurement(k, Side::Alice),
                        bob: self.transcript.measurement(k, Side::Bob),
                    },
                )
            })
            .collect()
    }
}

/// Prior over `(Alice's op, Bob's op)` for one block, `p[a][b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPrior {
    pub p: [[f64; 4]; 4],
}

impl JointPrior {
    pub fn uniform() -> Self {
        Self { p: [[1.0 / 16.0; 4]; 4] }
    }

    pub fn independent(alice: [f64; 4], bob: [f64; 4]) -> Result<Self, AdversaryError> {
        Self::new(alice.map(|pa| bob.map(|pb| pa * pb)))
    }

    pub fn point(a: PauliCode, b: PauliCode) -> Self {
        let mut p = [[0.0; 4]; 4];
        p[a.index()][b.index()] = 1.0;
        Self { p }
    }

    pub fn new(p: [[f64; 4]; 4]) -> Result<Self, AdversaryError> {
        if p.iter().flatten().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(AdversaryError::PriorInvalid);
        }
        let total: f64 = p.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AdversaryError::PriorNotNormalized(total));
        }
        Ok(Self { p })
    }

    /// Uniform for sides that may operate, `U0` for a side that declared
    /// silence.
    pub fn for_transcript(transcript: &Transcript) -> Self {
        let marginal = |side| {
            if transcript.declared_silence(side) {
                [1.0, 0.0, 0.0, 0.0]
            } else {
                [0.25; 4]
            }
        };
        Self::independent(marginal(Side::Alice), marginal(Side::Bob)).expect("valid marginals")
    }

    pub fn get(&self, a: PauliCode, b: PauliCode) -> f64 {
        self.p[a.index()][b.index()]
    }

    pub fn alice_marginal(&self) -> [f64; 4] {
        self.p.map(|row| row.iter().sum())
    }

    pub fn bob_marginal(&self) -> [f64; 4] {
        std::array::from_fn(|b| self.p.iter().map(|row| row[b]).sum())
    }

    /// Joint probability of `(a, b, view)` for every view of `pattern`;
    /// rows indexed by `4a + b`.
    fn joint_with_views(&self, pattern: Pattern) -> Vec<Vec<f64>> {
        let views = pattern.views();
        pairs()
            .map(|(a, b)| {
                let d = composite_distribution(a, b);
                views.iter().map(|v| self.get(a, b) * v.likelihood(d)).collect()
            })
            .collect()
    }
}

fn pairs() -> impl Iterator<Item = (PauliCode, PauliCode)> {
    PauliCode::ALL
        .into_iter()
        .flat_map(|a| PauliCode::ALL.into_iter().map(move |b| (a, b)))
}

fn composite_distribution(a: PauliCode, b: PauliCode) -> &'static OutcomeDistribution {
    static DISTRIBUTIONS: std::sync::OnceLock<Vec<OutcomeDistribution>> = std::sync::OnceLock::new();
    let all = DISTRIBUTIONS.get_or_init(|| {
        BellLabel::ALL
            .iter()
            .map(|&l| swap_decompose(BellLabel::PsiPlus, l))
            .collect()
    });
    &all[decode_table().composite(a, b).index()]
}

/// Mutual information (bits) between the view and each party's operation,
/// and the pair, for one block's announcement pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    pub alice: f64,
    pub bob: f64,
    pub joint: f64,
}

impl Leakage {
    fn plus(self, other: Leakage) -> Leakage {
        Leakage {
            alice: self.alice + other.alice,
            bob: self.bob + other.bob,
            joint: self.joint + other.joint,
        }
    }

    pub fn zero() -> Self {
        Leakage { alice: 0.0, bob: 0.0, joint: 0.0 }
    }
}

pub fn analytic_leakage(prior: &JointPrior, pattern: Pattern) -> Leakage {
    let joint = prior.joint_with_views(pattern);
    let n_views = pattern.views().len();
    let collapse = |key: fn(usize) -> usize| {
        let mut table = vec![vec![0.0; n_views]; 4];
        for (row, probs) in joint.iter().enumerate() {
            for (v, p) in probs.iter().enumerate() {
                table[key(row)][v] += p;
            }
        }
        table
    };
    Leakage {
        alice: mutual_information(&collapse(|row| row / 4)),
        bob: mutual_information(&collapse(|row| row % 4)),
        joint: mutual_information(&joint),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPosterior {
    pub block: u32,
    pub view: BlockView,
    pub pattern: Pattern,
    /// `P(view)` under the prior; zero means the transcript is inconsistent.
    pub evidence: f64,
    pub inconsistent: bool,
    /// `posterior[a][b]`; all zero when inconsistent.
    pub posterior: [[f64; 4]; 4],
    pub prior_entropy: f64,
    pub posterior_entropy: f64,
    /// Expected leakage of this block's announcement pattern.
    pub mutual_information: Leakage,
}

impl BlockPosterior {
    pub fn support(&self) -> Vec<(PauliCode, PauliCode)> {
        pairs()
            .filter(|&(a, b)| self.posterior[a.index()][b.index()] > 1e-12)
            .collect()
    }

    pub fn alice_posterior(&self) -> [f64; 4] {
        self.posterior.map(|row| row.iter().sum())
    }

    pub fn bob_posterior(&self) -> [f64; 4] {
        std::array::from_fn(|b| self.posterior.iter().map(|row| row[b]).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub session_id: String,
    pub prior: JointPrior,
    pub blocks: Vec<BlockPosterior>,
}

impl PosteriorReport {
    pub fn inconsistent_blocks(&self) -> Vec<u32> {
        self.blocks.iter().filter(|b| b.inconsistent).map(|b| b.block).collect()
    }
}

/// Exact Bayesian posterior over each block's operation pair.
pub fn eve_posterior(view: &EveView, prior: &JointPrior) -> Result<PosteriorReport, AdversaryError> {
    let prior = JointPrior::new(prior.p)?;
    let prior_entropy = entropy(prior.p.iter().flatten().copied());
    let mut leakage_cache: Vec<(Pattern, Leakage)> = Vec::new();
    let blocks = view
        .blocks()
        .into_iter()
        .map(|(block, seen)| {
            let pattern = seen.pattern();
            let mutual_information = match leakage_cache.iter().find(|(p, _)| *p == pattern) {
                Some(&(_, l)) => l,
                None => {
                    let l = analytic_leakage(&prior, pattern);
                    leakage_cache.push((pattern, l));
                    l
                }
            };
            let mut posterior = [[0.0; 4]; 4];
            for (a, b) in pairs() {
                posterior[a.index()][b.index()] =
                    prior.get(a, b) * seen.likelihood(composite_distribution(a, b));
            }
            let evidence: f64 = posterior.iter().flatten().sum();
            let inconsistent = evidence <= 1e-15;
            if !inconsistent {
                posterior.iter_mut().flatten().for_each(|p| *p /= evidence);
            }
            BlockPosterior {
                block,
                view: seen,
                pattern,
                evidence,
                inconsistent,
                posterior,
                prior_entropy,
                posterior_entropy: entropy(posterior.iter().flatten().copied()),
                mutual_information,
            }
        })
        .collect();
    Ok(PosteriorReport {
        session_id: view.transcript.session_id.clone(),
        prior,
        blocks,
    })
}

/// Per-session totals. Blocks are independent under the per-block prior, so
/// entropies and informations add.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationSummary {
    pub blocks: usize,
    pub prior_entropy: f64,
    pub posterior_entropy: f64,
    pub prior_entropy_alice: f64,
    pub prior_entropy_bob: f64,
    pub mutual_information: Leakage,
    pub inconsistent_blocks: Vec<u32>,
}

pub fn information_summary(report: &PosteriorReport, prior: &JointPrior) -> InformationSummary {
    let n = report.blocks.len() as f64;
    InformationSummary {
        blocks: report.blocks.len(),
        prior_entropy: n * entropy(prior.p.iter().flatten().copied()),
        posterior_entropy: report.blocks.iter().map(|b| b.posterior_entropy).sum(),
        prior_entropy_alice: n * entropy(prior.alice_marginal()),
        prior_entropy_bob: n * entropy(prior.bob_marginal()),
        mutual_information: report
            .blocks
            .iter()
            .fold(Leakage::zero(), |acc, b| acc.plus(b.mutual_information)),
        inconsistent_blocks: report.inconsistent_blocks(),
    }
}

/// Plug-in leakage estimate from `blocks` simulated blocks whose operations
/// are drawn from `prior` and whose outcomes come from the session sampler.
pub fn monte_carlo_leakage(prior: &JointPrior, pattern: Pattern, blocks: u32, seed: u64) -> Leakage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fe7e);
    let cumulative: Vec<f64> = prior
        .p
        .iter()
        .flatten()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let samples: Vec<(usize, usize)> = (1..=blocks)
        .map(|k| {
            let u: f64 = rng.random();
            let row = cumulative.iter().position(|&c| u < c).unwrap_or(15);
            let (a, b) = (PauliCode::ALL[row / 4], PauliCode::ALL[row % 4]);
            let outcome = block_outcome(seed, k, Some(a), Some(b));
            (row, pattern.view_index(outcome))
        })
        .collect();
    let n_views = pattern.views().len();
    Leakage {
        alice: empirical_mutual_information(samples.iter().map(|&(r, v)| (r / 4, v)), 4, n_views),
        bob: empirical_mutual_information(samples.iter().map(|&(r, v)| (r % 4, v)), 4, n_views),
        joint: empirical_mutual_information(samples.iter().copied(), 16, n_views),
    }
}
