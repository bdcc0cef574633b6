//! Small statistics helpers: chi-square goodness of fit and Shannon
//! quantities over finite distributions, all in bits.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Pearson test of `observed` counts against `expected` probabilities.
///
/// Categories with zero expected probability must have zero counts; they do
/// not contribute degrees of freedom.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut statistic = 0.0;
    let mut categories = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        if p <= 0.0 {
            if o > 0 {
                return ChiSquare {
                    statistic: f64::INFINITY,
                    degrees_of_freedom: 0,
                    p_value: 0.0,
                };
            }
            continue;
        }
        categories += 1;
        let e = n * p;
        statistic += (o as f64 - e).powi(2) / e;
    }
    let degrees_of_freedom = categories.saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .map(|d| d.sf(statistic))
            .unwrap_or(0.0)
    };
    ChiSquare {
        statistic,
        degrees_of_freedom,
        p_value,
    }
}

pub fn chi_square_uniform(observed: &[u64]) -> ChiSquare {
    let p = 1.0 / observed.len() as f64;
    chi_square(observed, &vec![p; observed.len()])
}

/// Shannon entropy in bits; zero entries contribute nothing.
pub fn entropy(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// `I(X;Y)` in bits from a joint table `joint[x][y]` summing to 1.
pub fn mutual_information(joint: &[Vec<f64>]) -> f64 {
    let cols = joint.first().map_or(0, Vec::len);
    let px: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let py: Vec<f64> = (0..cols).map(|y| joint.iter().map(|row| row[y]).sum()).collect();
    // Summed as p(x,y) log p(x,y)/(p(x)p(y)) so independent tables give an
    // exact zero instead of a difference of entropies.
    let mut total = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (px[x] * py[y])).log2();
            }
        }
    }
    total.max(0.0)
}

/// Plug-in mutual information estimate from paired category samples.
pub fn empirical_mutual_information(
    samples: impl IntoIterator<Item = (usize, usize)>,
    x_categories: usize,
    y_categories: usize,
) -> f64 {
    let mut counts = vec![vec![0u64; y_categories]; x_categories];
    let mut n = 0u64;
    for (x, y) in samples {
        counts[x][y] += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let joint: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / n as f64).collect())
        .collect();
    mutual_information(&joint)
}
