use super::{Dataset, MlError, CLASS_COUNT};

/// Gini impurity `1 - Σ (c_k / n)^2`.
pub fn gini(class_counts: &[u64]) -> Result<f64, MlError> {
    let n: u64 = class_counts.iter().sum();
    if n == 0 {
        return Err(MlError::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

fn sum_sq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Exact split score `Σ l_k^2 / n_l + Σ r_k^2 / n_r` as a fraction. The Gini
/// decrease is `score / n - Σ c_k^2 / n^2`, so it is monotone in the score.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: &[u64], right: &[u64], n_left: u64, n_right: u64) -> Self {
        let (nl, nr) = (n_left as u128, n_right as u128);
        Score {
            num: sum_sq(left) * nr + sum_sq(right) * nl,
            den: nl * nr,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

fn weighted_decrease(parent: &[u64], left: &[u64], right: &[u64]) -> f64 {
    let n = parent.iter().sum::<u64>() as f64;
    let nl = left.iter().sum::<u64>() as f64;
    let nr = right.iter().sum::<u64>() as f64;
    // Counts are non-empty on every path that reaches here.
    let g = |c: &[u64]| gini(c).unwrap_or(0.0);
    g(parent) - (nl / n) * g(left) - (nr / n) * g(right)
}

/// Midpoint that still routes `lo` left and `hi` right under `<=`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Exhaustive CART split search over `candidate_features`.
///
/// Returns the split with the largest Gini decrease; ties go to the lowest
/// feature index, then the lowest threshold. `None` when no split has a
/// positive decrease of at least `min_impurity_decrease`.
pub fn best_split(
    dataset: &Dataset,
    rows: &[usize],
    candidate_features: &[usize],
    min_impurity_decrease: f64,
) -> Option<Split> {
    if rows.len() < 2 || candidate_features.is_empty() {
        return None;
    }
    let parent = dataset.class_counts(rows);
    let n = rows.len() as u64;
    let parent_sq = sum_sq(&parent);

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<(Score, usize, f64, [u64; CLASS_COUNT])> = None;
    let mut sorted = rows.to_vec();
    for &f in &features {
        sorted.sort_by(|&a, &b| dataset.value(a, f).total_cmp(&dataset.value(b, f)));
        let mut left = [0u64; CLASS_COUNT];
        for pos in 0..sorted.len() - 1 {
            left[dataset.label(sorted[pos])] += 1;
            let here = dataset.value(sorted[pos], f);
            let next = dataset.value(sorted[pos + 1], f);
            if here == next {
                continue;
            }
            let n_left = pos as u64 + 1;
            let n_right = n - n_left;
            let mut right = parent;
            right.iter_mut().zip(&left).for_each(|(r, l)| *r -= l);
            let score = Score::new(&left, &right, n_left, n_right);
            // Positive decrease: score / n > parent_sq / n^2.
            if score.num * n as u128 <= parent_sq * score.den {
                continue;
            }
            if best.as_ref().is_none_or(|(b, ..)| score.beats(b)) {
                best = Some((score, f, midpoint(here, next), left));
            }
        }
    }

    let (_, feature, threshold, left) = best?;
    let mut right = parent;
    right.iter_mut().zip(&left).for_each(|(r, l)| *r -= l);
    let impurity_decrease = weighted_decrease(&parent, &left, &right);
    if impurity_decrease < min_impurity_decrease {
        return None;
    }
    Some(Split {
        feature,
        threshold,
        impurity_decrease,
    })
}
