//! Level-wise frequent itemset mining over sorted `u32` transactions.

use std::collections::HashMap;

use rayon::prelude::*;

pub type Itemset = Vec<u32>;

/// All itemsets of length `1..=max_len` contained in at least `min_count`
/// transactions, with their support counts. Transactions must be sorted and
/// duplicate-free. Output is ordered by length, then lexicographically.
pub fn frequent_itemsets(transactions: &[Vec<u32>], min_count: usize, max_len: usize) -> Vec<(Itemset, usize)> {
    let min_count = min_count.max(1);
    let mut out = Vec::new();
    if transactions.is_empty() || max_len == 0 {
        return out;
    }

    let mut singles: HashMap<u32, usize> = HashMap::new();
    for t in transactions {
        for &item in t {
            *singles.entry(item).or_default() += 1;
        }
    }
    let mut level: Vec<(Itemset, usize)> = singles
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(i, c)| (vec![i], c))
        .collect();
    level.sort();

    // Items that can still take part in a larger frequent set.
    let frequent_items: Vec<u32> = level.iter().map(|(s, _)| s[0]).collect();
    let reduced: Vec<Vec<u32>> = transactions
        .iter()
        .map(|t| t.iter().copied().filter(|i| frequent_items.binary_search(i).is_ok()).collect())
        .collect();

    let mut k = 1;
    while !level.is_empty() {
        out.extend(level.iter().cloned());
        if k == max_len {
            break;
        }
        let candidates = join_and_prune(&level);
        if candidates.is_empty() {
            break;
        }
        let counts = count_support(&reduced, &candidates, k + 1);
        level = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| c >= min_count)
            .collect();
        k += 1;
    }
    out
}

/// Joins frequent k-sets sharing a (k-1)-prefix and drops candidates with an
/// infrequent k-subset.
fn join_and_prune(level: &[(Itemset, usize)]) -> Vec<Itemset> {
    let frequent: std::collections::HashSet<&[u32]> = level.iter().map(|(s, _)| s.as_slice()).collect();
    let k = level[0].0.len();
    let mut candidates = Vec::new();
    for (i, (a, _)) in level.iter().enumerate() {
        for (b, _) in &level[i + 1..] {
            if a[..k - 1] != b[..k - 1] {
                // level is sorted, so no later b shares the prefix either
                break;
            }
            let mut cand = a.clone();
            cand.push(b[k - 1]);
            let all_subsets_frequent = (0..cand.len()).all(|skip| {
                let sub: Vec<u32> = cand
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != skip)
                    .map(|(_, &x)| x)
                    .collect();
                frequent.contains(sub.as_slice())
            });
            if all_subsets_frequent {
                candidates.push(cand);
            }
        }
    }
    candidates
}

fn count_support(transactions: &[Vec<u32>], candidates: &[Itemset], k: usize) -> Vec<usize> {
    let index: HashMap<&[u32], usize> = candidates.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    transactions
        .par_iter()
        .fold(
            || vec![0usize; candidates.len()],
            |mut acc, t| {
                if t.len() < k {
                    return acc;
                }
                if binomial_at_most(t.len(), k, candidates.len()) {
                    let mut combo = Vec::with_capacity(k);
                    for_each_combination(t, k, 0, &mut combo, &mut |c| {
                        if let Some(&i) = index.get(c) {
                            acc[i] += 1;
                        }
                    });
                } else {
                    for (i, c) in candidates.iter().enumerate() {
                        if is_sorted_subset(c, t) {
                            acc[i] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0usize; candidates.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn binomial_at_most(n: usize, k: usize, limit: usize) -> bool {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > limit as u128 {
            return false;
        }
    }
    true
}

fn for_each_combination(items: &[u32], k: usize, start: usize, combo: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if combo.len() == k {
        f(combo);
        return;
    }
    let need = k - combo.len();
    for i in start..=items.len() - need {
        combo.push(items[i]);
        for_each_combination(items, k, i + 1, combo, f);
        combo.pop();
    }
}

/// Both slices sorted ascending.
pub fn is_sorted_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_check() {
        assert!(is_sorted_subset(&[1, 3], &[0, 1, 2, 3]));
        assert!(!is_sorted_subset(&[1, 4], &[0, 1, 2, 3]));
        assert!(is_sorted_subset(&[], &[0]));
    }

    #[test]
    fn small_example() {
        let t = vec![vec![0, 1], vec![0, 1], vec![0]];
        let got = frequent_itemsets(&t, 2, 3);
        assert_eq!(got, vec![(vec![0], 3), (vec![1], 2), (vec![0, 1], 2)]);
    }

    #[test]
    fn both_counting_paths_agree() {
        // long rows take the direct scan, three-item rows take the enumeration path
        let mut t: Vec<Vec<u32>> = (0..30u32).map(|i| (0..12).filter(|b| (i * 7 + b * 3) % 5 < 3).collect()).collect();
        t.extend([vec![0, 1, 2], vec![1, 4, 7], vec![2, 5, 9], vec![1, 4, 7]]);
        let candidates: Vec<Itemset> = vec![vec![0, 1, 2], vec![1, 4, 7], vec![2, 5, 11]];
        let via_enum = count_support(&t, &candidates, 3);
        let direct: Vec<usize> = candidates
            .iter()
            .map(|c| t.iter().filter(|tx| is_sorted_subset(c, tx)).count())
            .collect();
        assert_eq!(via_enum, direct);
    }
}
