//! Edit-distance kernels shared by the keyword and scoring metrics.

/// Weighted edit distance between two sequences.
///
/// Insertions and deletions cost 1; substituting `x` for `y` costs
/// `sub_cost(x, y)`, which must lie in `[0, 1]` and be 0 for equal items.
pub fn weighted_edit_distance<T>(a: &[T], b: &[T], mut sub_cost: impl FnMut(&T, &T) -> f64) -> f64 {
    if a.is_empty() {
        return b.len() as f64;
    }
    if b.is_empty() {
        return a.len() as f64;
    }

    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64).collect();
    let mut curr = vec![0.0; b.len() + 1];

    for (i, x) in a.iter().enumerate() {
        curr[0] = (i + 1) as f64;
        for (j, y) in b.iter().enumerate() {
            let del = prev[j + 1] + 1.0;
            let ins = curr[j] + 1.0;
            let sub = prev[j] + sub_cost(x, y);
            curr[j + 1] = del.min(ins).min(sub);
        }
        std::mem::swap(&mut prev, &mut curr);
    }

    prev[b.len()]
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }

    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];

    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }

    prev[b.len()]
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)`, with two empty strings scoring 1.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_pairs() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
        assert_eq!(levenshtein("süß", "sus"), 2);
    }

    #[test]
    fn weighted_matches_unit_cost_when_costs_are_binary() {
        let a: Vec<char> = "saturday".chars().collect();
        let b: Vec<char> = "sunday".chars().collect();
        let d = weighted_edit_distance(&a, &b, |x, y| if x == y { 0.0 } else { 1.0 });
        assert_eq!(d, 3.0);
    }

    #[test]
    fn fractional_substitution_is_preferred_over_indel_pair() {
        let d = weighted_edit_distance(&[1, 2], &[1, 3], |x, y| if x == y { 0.0 } else { 0.25 });
        assert_eq!(d, 0.25);
    }
}
