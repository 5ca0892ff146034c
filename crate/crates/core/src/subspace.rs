//! Random subset selection of candidate controls.
//!
//! A [`SelectionDraw`] is the index form of a k×p selector matrix: row `i`
//! picks candidate `indices[i]`.

use rand::Rng;

use crate::error::{Error, Result};

/// One random subset of candidate-control indices, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionDraw {
    pub indices: Vec<usize>,
    pub p_total: usize,
}

impl SelectionDraw {
    /// The draw that keeps every candidate.
    pub fn full(p_total: usize) -> Self {
        SelectionDraw {
            indices: (0..p_total).collect(),
            p_total,
        }
    }

    pub fn empty(p_total: usize) -> Self {
        SelectionDraw {
            indices: Vec::new(),
            p_total,
        }
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Partial Fisher-Yates over `pool`, returning `k` distinct members.
fn sample_from<R: Rng + ?Sized>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let mut work = pool.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..work.len());
        work.swap(i, j);
    }
    work.truncate(k);
    work
}

/// Uniform draw over all size-`k` subsets of `{0, …, p_total-1}`.
pub fn draw_uniform<R: Rng + ?Sized>(p_total: usize, k: usize, rng: &mut R) -> Result<SelectionDraw> {
    if k > p_total {
        return Err(Error::InvalidDimension(format!(
            "subspace dimension {k} exceeds {p_total} candidates"
        )));
    }
    if k == 0 && p_total > 0 {
        return Err(Error::InvalidDimension("subspace dimension must be positive".into()));
    }
    let pool: Vec<usize> = (0..p_total).collect();
    let mut indices = sample_from(&pool, k, rng);
    indices.sort_unstable();
    Ok(SelectionDraw { indices, p_total })
}

/// Splits `k` across categories in proportion to their sizes.
///
/// Quotas are rounded by largest remainder (lower category index wins ties),
/// with every category receiving at least one and at most its size.
pub fn allocate_category_dims(sizes: &[usize], k: usize) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Infeasible("categories must be nonempty".into()));
    }
    if k < sizes.len() {
        return Err(Error::Infeasible(format!(
            "subspace dimension {k} is below the number of categories {}",
            sizes.len()
        )));
    }
    if k > total {
        return Err(Error::Infeasible(format!(
            "subspace dimension {k} exceeds {total} candidates"
        )));
    }
    let quota: Vec<f64> = sizes.iter().map(|&s| k as f64 * s as f64 / total as f64).collect();
    let mut alloc: Vec<usize> = quota
        .iter()
        .zip(sizes)
        .map(|(&q, &s)| (q.floor() as usize).clamp(1, s))
        .collect();
    let mut assigned: usize = alloc.iter().sum();
    while assigned < k {
        // Largest remainder among categories with room; first index wins ties.
        let mut best: Option<(usize, f64)> = None;
        for c in 0..sizes.len() {
            if alloc[c] >= sizes[c] {
                continue;
            }
            let rem = quota[c] - alloc[c] as f64;
            if best.is_none_or(|(_, r)| rem > r) {
                best = Some((c, rem));
            }
        }
        let (c, _) = best.expect("k <= total guarantees room");
        alloc[c] += 1;
        assigned += 1;
    }
    while assigned > k {
        // Remove from the most over-allocated category; last index loses ties.
        let mut best: Option<(usize, f64)> = None;
        for c in 0..sizes.len() {
            if alloc[c] <= 1 {
                continue;
            }
            let over = alloc[c] as f64 - quota[c];
            if best.is_none_or(|(_, o)| over >= o) {
                best = Some((c, over));
            }
        }
        let (c, _) = best.expect("k >= categories guarantees slack");
        alloc[c] -= 1;
        assigned -= 1;
    }
    Ok(alloc)
}

/// Candidate indices grouped by category, with a per-category draw size.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryLayout {
    pub category_names: Vec<String>,
    pub members: Vec<Vec<usize>>,
    pub per_category_k: Vec<usize>,
}

impl CategoryLayout {
    /// Contiguous categories: the first `sizes[0]` indices form category 0, and so on.
    pub fn from_sizes(names: Vec<String>, sizes: &[usize], k: usize) -> Result<Self> {
        if names.len() != sizes.len() {
            return Err(Error::DimensionMismatch {
                what: "category names",
                expected: sizes.len(),
                found: names.len(),
            });
        }
        let per_category_k = allocate_category_dims(sizes, k)?;
        let mut members = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            members.push((start..start + s).collect());
            start += s;
        }
        Ok(CategoryLayout {
            category_names: names,
            members,
            per_category_k,
        })
    }

    /// Groups candidates by label, keeping categories in order of first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], k: usize) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            let label = label.as_ref();
            match names.iter().position(|n| n == label) {
                Some(c) => members[c].push(i),
                None => {
                    names.push(label.to_string());
                    members.push(vec![i]);
                }
            }
        }
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        let per_category_k = allocate_category_dims(&sizes, k)?;
        Ok(CategoryLayout {
            category_names: names,
            members,
            per_category_k,
        })
    }

    pub fn p_total(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn k(&self) -> usize {
        self.per_category_k.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.members.len() != self.per_category_k.len() || self.members.len() != self.category_names.len() {
            return Err(Error::InvalidDimension("category layout lengths disagree".into()));
        }
        for (c, (m, &kc)) in self.members.iter().zip(&self.per_category_k).enumerate() {
            if kc == 0 || kc > m.len() {
                return Err(Error::InvalidDimension(format!(
                    "category `{}` draws {kc} of {} members",
                    self.category_names[c],
                    m.len()
                )));
            }
        }
        let mut all: Vec<usize> = self.members.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) || all.last().is_some_and(|&m| m >= all.len()) {
            return Err(Error::InvalidDimension(
                "category members must partition 0..p_total".into(),
            ));
        }
        Ok(())
    }
}

/// Stratified draw: a uniform subset of each category's members, unioned.
pub fn draw_by_category<R: Rng + ?Sized>(layout: &CategoryLayout, rng: &mut R) -> Result<SelectionDraw> {
    layout.validate()?;
    let mut indices = Vec::with_capacity(layout.k());
    for (m, &kc) in layout.members.iter().zip(&layout.per_category_k) {
        indices.extend(sample_from(m, kc, rng));
    }
    indices.sort_unstable();
    Ok(SelectionDraw {
        indices,
        p_total: layout.p_total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn full_subset_is_forced() {
        let mut rng = stream(1, &[]);
        for _ in 0..20 {
            assert_eq!(draw_uniform(6, 6, &mut rng).unwrap(), SelectionDraw::full(6));
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut rng = stream(1, &[]);
        assert!(matches!(draw_uniform(3, 4, &mut rng), Err(Error::InvalidDimension(_))));
        assert!(matches!(draw_uniform(3, 0, &mut rng), Err(Error::InvalidDimension(_))));
        assert!(draw_uniform(0, 0, &mut rng).unwrap().indices.is_empty());
    }

    #[test]
    fn inclusion_frequency_is_k_over_p() {
        let mut rng = stream(2, &[]);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            for i in draw_uniform(5, 3, &mut rng).unwrap().indices {
                counts[i] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.6).abs() < 0.01);
        }
    }

    fn chi_square_uniform(counts: &HashMap<Vec<usize>, usize>, cells: usize, n: usize) -> f64 {
        assert_eq!(counts.len(), cells);
        let e = n as f64 / cells as f64;
        counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum()
    }

    #[test]
    fn uniform_over_all_subsets() {
        let mut rng = stream(3, &[]);
        let n = 50_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            *counts.entry(draw_uniform(5, 3, &mut rng).unwrap().indices).or_insert(0) += 1;
        }
        // 9 degrees of freedom; the 0.999 quantile is 27.88.
        assert!(chi_square_uniform(&counts, 10, n) < 27.88);
    }

    #[test]
    fn single_category_matches_uniform() {
        let layout = CategoryLayout::from_sizes(vec!["all".into()], &[5], 3).unwrap();
        let mut rng = stream(4, &[]);
        let n = 50_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            *counts.entry(draw_by_category(&layout, &mut rng).unwrap().indices).or_insert(0) += 1;
        }
        assert!(chi_square_uniform(&counts, 10, n) < 27.88);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_category_dims(&[10, 90], 50).unwrap(), vec![5, 45]);
        assert_eq!(allocate_category_dims(&[4, 4], 5).unwrap(), vec![3, 2]);
        assert_eq!(allocate_category_dims(&[1, 99], 50).unwrap(), vec![1, 49]);
        assert!(matches!(allocate_category_dims(&[3, 3, 3], 2), Err(Error::Infeasible(_))));
    }

    #[test]
    fn category_counts_are_exact() {
        let layout = CategoryLayout::from_sizes(vec!["a".into(), "b".into()], &[10, 90], 50).unwrap();
        assert_eq!(layout.per_category_k, vec![5, 45]);
        let mut rng = stream(5, &[]);
        for _ in 0..1000 {
            let d = draw_by_category(&layout, &mut rng).unwrap();
            assert_eq!(d.indices.iter().filter(|&&i| i < 10).count(), 5);
            assert_eq!(d.k(), 50);
        }
    }

    #[test]
    fn singleton_categories_are_forced() {
        let layout = CategoryLayout::from_sizes(vec!["a".into(), "b".into()], &[1, 1], 2).unwrap();
        let d = draw_by_category(&layout, &mut stream(6, &[])).unwrap();
        assert_eq!(d.indices, vec![0, 1]);
    }

    #[test]
    fn labels_group_noncontiguous_members() {
        let layout = CategoryLayout::from_labels(&["x", "y", "x", "y", "y"], 3).unwrap();
        assert_eq!(layout.members, vec![vec![0, 2], vec![1, 3, 4]]);
        assert_eq!(layout.per_category_k, vec![1, 2]);
    }

    proptest! {
        #[test]
        fn draws_are_sorted_distinct_and_in_range(p in 1usize..60, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let k = ((p as f64 * frac) as usize).max(1);
            let d = draw_uniform(p, k, &mut stream(seed, &[])).unwrap();
            prop_assert_eq!(d.k(), k);
            prop_assert!(d.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(d.indices.iter().all(|&i| i < p));
        }

        #[test]
        fn allocation_sums_to_k(sizes in prop::collection::vec(1usize..30, 1..6), extra in 0usize..100) {
            let total: usize = sizes.iter().sum();
            let k = (sizes.len() + extra).min(total);
            let alloc = allocate_category_dims(&sizes, k).unwrap();
            prop_assert_eq!(alloc.iter().sum::<usize>(), k);
            for (a, s) in alloc.iter().zip(&sizes) {
                prop_assert!(*a >= 1 && a <= s);
            }
        }

        #[test]
        fn category_draw_covers_every_category(sizes in prop::collection::vec(1usize..12, 1..5), seed in any::<u64>()) {
            let names = (0..sizes.len()).map(|c| c.to_string()).collect();
            let total: usize = sizes.iter().sum();
            let layout = CategoryLayout::from_sizes(names, &sizes, total.min(sizes.len() + 3)).unwrap();
            let d = draw_by_category(&layout, &mut stream(seed, &[])).unwrap();
            for m in &layout.members {
                prop_assert!(d.indices.iter().any(|i| m.contains(i)));
            }
        }
    }
}
