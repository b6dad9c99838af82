//! Exact Fisher-Jenks natural breaks.
//!
//! The sorted input is split into `k` contiguous classes minimizing the total
//! within-class sum of squared deviations (SSD). The optimizer works on the
//! distinct values weighted by multiplicity, so equal values never straddle a
//! cut. Rows of the dynamic program are filled by divide and conquer over the
//! monotone optimal split point, which the SSD cost guarantees (it satisfies
//! the quadrangle inequality), for `O(k · m log m)` time in `m` distinct
//! values and `O(k · m)` memory. No `m × m` cost matrix is ever built.

use crate::error::{Error, Result};
use crate::model::{Bracket, BracketTable};

/// Largest instance `brute_force_breaks` accepts.
pub const BRUTE_FORCE_LIMIT: usize = 16;

/// Relative slack under which two candidate partitions count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BreaksResult {
    boundaries: Vec<f64>,
    partition: Vec<usize>,
    class_min: Vec<f64>,
    class_max: Vec<f64>,
    total_within_class_ssd: f64,
}

impl BreaksResult {
    /// First value of every class except the first.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Class index of every input value, in input order.
    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn class_count(&self) -> usize {
        self.class_min.len()
    }

    pub fn class_min(&self) -> &[f64] {
        &self.class_min
    }

    pub fn class_max(&self) -> &[f64] {
        &self.class_max
    }

    pub fn total_within_class_ssd(&self) -> f64 {
        self.total_within_class_ssd
    }

    /// Sizes of the classes, in class order.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count()];
        for &c in &self.partition {
            sizes[c] += 1;
        }
        sizes
    }

    /// Builds `[start, end)` position ranges over the sorted input into a result.
    fn from_sorted_ranges(values: &[f64], order: &[usize], ends: &[usize]) -> Self {
        let mut partition = vec![0; values.len()];
        let mut boundaries = Vec::with_capacity(ends.len().saturating_sub(1));
        let mut class_min = Vec::with_capacity(ends.len());
        let mut class_max = Vec::with_capacity(ends.len());
        let mut total = 0.0;
        let mut start = 0;
        for (class, &end) in ends.iter().enumerate() {
            let members = &order[start..end];
            if class > 0 {
                boundaries.push(values[members[0]]);
            }
            class_min.push(values[members[0]]);
            class_max.push(values[members[members.len() - 1]]);
            for &idx in members {
                partition[idx] = class;
            }
            total += ssd(members.iter().map(|&i| values[i]));
            start = end;
        }
        Self { boundaries, partition, class_min, class_max, total_within_class_ssd: total }
    }
}

/// Two-pass sum of squared deviations from the mean.
pub fn ssd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum()
}

/// Input positions sorted by value, ties by position.
fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidClassCount { k: 0, reason: "no values to classify".into() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("values to classify must be finite".into()));
    }
    Ok(())
}

/// Prefix sums over distinct values weighted by their multiplicity, centered
/// on a shift to limit cancellation.
struct WeightedPrefix {
    count: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl WeightedPrefix {
    fn new(distinct: &[(f64, usize)]) -> Self {
        let shift = distinct[distinct.len() / 2].0;
        let m = distinct.len();
        let (mut count, mut sum, mut sum_sq) =
            (Vec::with_capacity(m + 1), Vec::with_capacity(m + 1), Vec::with_capacity(m + 1));
        count.push(0.0);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &(v, c) in distinct {
            let (c, d) = (c as f64, v - shift);
            count.push(count.last().unwrap() + c);
            sum.push(sum.last().unwrap() + c * d);
            sum_sq.push(sum_sq.last().unwrap() + c * d * d);
        }
        Self { count, sum, sum_sq }
    }

    /// SSD of distinct values `from..to`.
    #[inline]
    fn cost(&self, from: usize, to: usize) -> f64 {
        let n = self.count[to] - self.count[from];
        let s = self.sum[to] - self.sum[from];
        let q = self.sum_sq[to] - self.sum_sq[from];
        (q - s * s / n).max(0.0)
    }
}

/// Fills `row[i]` for `i in lo..hi` with `min_j cost(i, j) + prev[j]`, the
/// best split `j` lying in `opt_lo..=opt_hi`.
fn fill_row(
    prefix: &WeightedPrefix,
    prev: &[f64],
    row: &mut [f64],
    lo: usize,
    hi: usize,
    opt_lo: usize,
    opt_hi: usize,
) {
    if lo >= hi {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let first = opt_lo.max(mid + 1);
    let mut best = f64::INFINITY;
    let mut best_j = first;
    for (j, &tail) in prev.iter().enumerate().take(opt_hi + 1).skip(first) {
        let candidate = prefix.cost(mid, j) + tail;
        if candidate < best {
            best = candidate;
            best_j = j;
        }
    }
    row[mid] = best;
    fill_row(prefix, prev, row, lo, mid, opt_lo, best_j);
    fill_row(prefix, prev, row, mid + 1, hi, best_j, opt_hi);
}

/// Optimal natural breaks of `values` into `k_classes` classes.
///
/// Ties between equal-SSD partitions go to the smallest first class, then the
/// smallest second class, and so on.
pub fn jenks_breaks(values: &[f64], k_classes: usize) -> Result<BreaksResult> {
    check_values(values)?;
    let order = sorted_order(values);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &i in &order {
        match distinct.last_mut() {
            Some((v, c)) if *v == values[i] => *c += 1,
            _ => distinct.push((values[i], 1)),
        }
    }
    let m = distinct.len();
    if k_classes < 1 {
        return Err(Error::InvalidClassCount { k: k_classes, reason: "need at least one class".into() });
    }
    if k_classes > m {
        return Err(Error::InvalidClassCount {
            k: k_classes,
            reason: format!("only {m} distinct values; use at most {m} classes"),
        });
    }

    let prefix = WeightedPrefix::new(&distinct);
    // rows[c - 1][i]: least SSD splitting distinct values i..m into c classes
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_classes);
    rows.push((0..=m).map(|i| if i < m { prefix.cost(i, m) } else { f64::INFINITY }).collect());
    for c in 2..=k_classes {
        let mut row = vec![f64::INFINITY; m + 1];
        // c classes over i..m need i <= m - c, and the split j <= m - c + 1
        let last_split = m + 1 - c;
        fill_row(&prefix, &rows[c - 2], &mut row, 0, last_split, 1, last_split);
        rows.push(row);
    }

    let tolerance = TIE_TOLERANCE * rows[0][0];
    let mut ends_distinct = Vec::with_capacity(k_classes);
    let mut start = 0;
    for c in (2..=k_classes).rev() {
        let target = rows[c - 1][start] + tolerance;
        let prev = &rows[c - 2];
        let j = (start + 1..=m + 1 - c)
            .find(|&j| prefix.cost(start, j) + prev[j] <= target)
            .expect("optimal split exists within tolerance");
        ends_distinct.push(j);
        start = j;
    }
    ends_distinct.push(m);

    // distinct-value ends to sorted-position ends
    let mut cumulative = Vec::with_capacity(m + 1);
    cumulative.push(0);
    for &(_, c) in &distinct {
        cumulative.push(cumulative.last().unwrap() + c);
    }
    let ends: Vec<usize> = ends_distinct.iter().map(|&j| cumulative[j]).collect();
    Ok(BreaksResult::from_sorted_ranges(values, &order, &ends))
}

/// Exhaustive search over every contiguous partition of the sorted values.
/// Testing oracle; limited to `BRUTE_FORCE_LIMIT` values.
pub fn brute_force_breaks(values: &[f64], k_classes: usize) -> Result<BreaksResult> {
    check_values(values)?;
    let n = values.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    if k_classes < 1 || k_classes > n {
        return Err(Error::InvalidClassCount { k: k_classes, reason: format!("must lie in 1..={n}") });
    }
    let order = sorted_order(values);
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cuts = Vec::with_capacity(k_classes - 1);
    enumerate_cuts(1, n, k_classes - 1, &mut cuts, &mut |cuts| {
        let mut ends = cuts.to_vec();
        ends.push(n);
        let mut start = 0;
        let mut total = 0.0;
        for &end in &ends {
            total += ssd(sorted[start..end].iter().copied());
            start = end;
        }
        // lexicographic enumeration: keep the first minimum seen
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, ends));
        }
    });
    let (_, ends) = best.expect("at least one partition");
    Ok(BreaksResult::from_sorted_ranges(values, &order, &ends))
}

/// Calls `visit` with every increasing sequence of `remaining` cut positions
/// drawn from `from..n`, in lexicographic order.
fn enumerate_cuts(from: usize, n: usize, remaining: usize, cuts: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if remaining == 0 {
        visit(cuts);
        return;
    }
    for cut in from..=n - remaining {
        cuts.push(cut);
        enumerate_cuts(cut + 1, n, remaining - 1, cuts, visit);
        cuts.pop();
    }
}

/// Turns a classification into income brackets carrying one mean Sortino per class.
///
/// The first bracket starts at the smallest value, each later bracket at its
/// class boundary, and the top bracket ends (inclusively) at the largest value.
pub fn to_bracket_table(result: &BreaksResult, bracket_sortino_means: &[f64]) -> Result<BracketTable> {
    let k = result.class_count();
    if bracket_sortino_means.len() != k {
        return Err(Error::InvalidBrackets(format!("{} means for {k} classes", bracket_sortino_means.len())));
    }
    let brackets = (0..k)
        .map(|j| Bracket {
            lower: if j == 0 { result.class_min[0] } else { result.boundaries[j - 1] },
            upper: if j + 1 < k { result.boundaries[j] } else { result.class_max[k - 1] },
            mean_sortino: bracket_sortino_means[j],
        })
        .collect();
    BracketTable::new(brackets)
}
