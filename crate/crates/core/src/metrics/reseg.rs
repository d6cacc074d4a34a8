//! Minimum edit-distance resegmentation of an unsegmented hypothesis.

use serde::{Deserialize, Serialize};

use crate::textnorm::edit_distance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resegmentation {
    pub segments: Vec<Vec<String>>,
    /// Total word edit distance of the chosen placement.
    pub cost: usize,
}

impl Resegmentation {
    /// Start offset of each segment in the hypothesis.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut at = 0;
        self.segments
            .iter()
            .map(|s| {
                let b = at;
                at += s.len();
                b
            })
            .collect()
    }
}

/// `table[k][j]`: least cost of covering `hyp[..j]` with the first `k` refs.
fn prefix_costs<T: PartialEq>(hyp: &[T], refs: &[&[T]]) -> Vec<Vec<usize>> {
    let n = hyp.len();
    let inf = usize::MAX / 4;
    let mut table = vec![vec![inf; n + 1]];
    table[0][0] = 0;
    for r in refs {
        let prev = table.last().expect("seeded");
        // g[m]: best cost with the current segment matched against r[..m]
        let mut g: Vec<usize> = (0..=r.len()).map(|m| prev[0] + m).collect();
        let mut row = vec![inf; n + 1];
        row[0] = g[r.len()];
        for j in 1..=n {
            let mut next = vec![0; r.len() + 1];
            next[0] = prev[j].min(g[0] + 1);
            for m in 1..=r.len() {
                let sub = g[m - 1] + usize::from(hyp[j - 1] != r[m - 1]);
                next[m] = sub.min(g[m] + 1).min(next[m - 1] + 1);
            }
            g = next;
            row[j] = g[r.len()];
        }
        table.push(row);
    }
    table
}

/// Cost of `hyp[from..j]` against `r` for every `j >= from`.
fn slice_costs<T: PartialEq>(hyp: &[T], from: usize, r: &[T]) -> Vec<usize> {
    let mut g: Vec<usize> = (0..=r.len()).collect();
    let mut out = vec![g[r.len()]];
    for h in &hyp[from..] {
        let mut next = vec![g[0] + 1; r.len() + 1];
        for m in 1..=r.len() {
            let sub = g[m - 1] + usize::from(*h != r[m - 1]);
            next[m] = sub.min(g[m] + 1).min(next[m - 1] + 1);
        }
        g = next;
        out.push(g[r.len()]);
    }
    out
}

/// Splits `hyp` into `refs.len()` contiguous slices minimizing the summed
/// word edit distance against the references. Among optimal placements the
/// one with the earliest boundaries (lexicographically) is returned.
pub fn resegment<S: AsRef<str>, R: AsRef<str>>(hyp: &[S], refs: &[Vec<R>]) -> Resegmentation {
    let hyp: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let refs: Vec<Vec<&str>> = refs
        .iter()
        .map(|r| r.iter().map(AsRef::as_ref).collect())
        .collect();
    let n = hyp.len();
    let k = refs.len();
    if k == 0 {
        return Resegmentation {
            segments: Vec::new(),
            cost: 0,
        };
    }

    // suffix[t][i]: least cost of covering hyp[i..] with refs[t..]
    let rev_hyp: Vec<&str> = hyp.iter().rev().copied().collect();
    let rev_refs: Vec<Vec<&str>> = refs
        .iter()
        .rev()
        .map(|r| r.iter().rev().copied().collect())
        .collect();
    let rev_slices: Vec<&[&str]> = rev_refs.iter().map(Vec::as_slice).collect();
    let rev = prefix_costs(&rev_hyp, &rev_slices);
    let suffix = |t: usize, i: usize| rev[k - t][n - i];
    let total = suffix(0, 0);

    let mut segments = Vec::with_capacity(k);
    let mut at = 0;
    let mut spent = 0;
    for (t, r) in refs.iter().enumerate() {
        let end = if t + 1 == k {
            n
        } else {
            let costs = slice_costs(&hyp, at, r);
            (at..=n)
                .find(|&j| spent + costs[j - at] + suffix(t + 1, j) == total)
                .expect("an optimal continuation exists")
        };
        spent += edit_distance(&hyp[at..end], r);
        segments.push(hyp[at..end].iter().map(|s| s.to_string()).collect());
        at = end;
    }
    debug_assert_eq!(spent, total);
    Resegmentation {
        segments,
        cost: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn perfect_alignment() {
        let refs = vec![w("a b c"), w("d e"), w("f")];
        let r = resegment(&w("a b c d e f"), &refs);
        assert_eq!(r.segments, refs);
        assert_eq!(r.cost, 0);
    }

    #[test]
    fn empty_hypothesis() {
        let refs = vec![w("a b"), w("c"), w("d")];
        let r = resegment::<String, String>(&[], &refs);
        assert_eq!(r.segments, vec![Vec::<String>::new(); 3]);
        assert_eq!(r.cost, 4);
    }

    #[test]
    fn ties_take_earliest_boundary() {
        // "x" costs 1 on either side
        let r = resegment(&w("a x b"), &[w("a"), w("b")]);
        assert_eq!(r.segments, vec![w("a"), w("x b")]);
        assert_eq!(r.cost, 1);
        assert_eq!(r.boundaries(), vec![0, 1]);
    }

    #[test]
    fn no_refs() {
        let r = resegment::<_, String>(&w("a"), &[]);
        assert!(r.segments.is_empty());
    }
}
