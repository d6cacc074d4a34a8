//! Slow, obviously-correct reference implementations.

use std::collections::HashMap;

use unicode_general_category::{get_general_category, GeneralCategory as G};

/// Plain recursive edit distance with memoization on suffix positions.
pub fn edit_distance_recursive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(v) = memo.get(&(i, j)) {
            return *v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

fn oracle_normalize(w: &str) -> Vec<char> {
    w.chars()
        .filter(|c| {
            !matches!(
                get_general_category(*c),
                G::ConnectorPunctuation
                    | G::DashPunctuation
                    | G::OpenPunctuation
                    | G::ClosePunctuation
                    | G::InitialPunctuation
                    | G::FinalPunctuation
                    | G::OtherPunctuation
            )
        })
        .flat_map(char::to_lowercase)
        .collect()
}

/// Lowercase, strip punctuation, compare by recursive edit distance.
pub fn words_match_oracle(a: &str, b: &str, threshold: usize) -> bool {
    edit_distance_recursive(&oracle_normalize(a), &oracle_normalize(b)) <= threshold
}

/// Vote simulator that recounts full prefixes at every length.
///
/// `beams` are continuations beyond the committed prefix, listed in
/// descending score order. `needed` is the absolute vote bar.
pub fn ralcp_oracle(beams: &[Vec<&str>], needed: usize, filter_empty: bool, sep: &str) -> Vec<String> {
    let voters: Vec<&Vec<&str>> = beams
        .iter()
        .filter(|b| !(filter_empty && b.is_empty()))
        .collect();
    let mut out: Vec<&str> = Vec::new();
    loop {
        let p = out.len();
        // candidate next tokens among voters that hold the emitted prefix
        let mut best: Option<(&str, usize, usize)> = None; // token, votes, first holder
        for (idx, v) in voters.iter().enumerate() {
            if v.len() <= p || v[..p] != out[..] {
                continue;
            }
            let tok = v[p];
            let votes = voters
                .iter()
                .filter(|w| w.len() > p && w[..p] == out[..] && w[p] == tok)
                .count();
            let better = match best {
                None => true,
                Some((_, bv, _)) => votes > bv,
            };
            if better {
                best = Some((tok, votes, idx));
            }
        }
        match best {
            Some((tok, votes, _)) if votes >= needed.max(1) => {
                out.push(tok);
                if tok == sep {
                    break;
                }
            }
            _ => break,
        }
    }
    out.into_iter().map(str::to_string).collect()
}

/// Every placement of `refs.len() - 1` boundaries; returns the least cost
/// and the lexicographically earliest boundary vector achieving it.
pub fn reseg_oracle(hyp: &[&str], refs: &[Vec<&str>]) -> (usize, Vec<usize>) {
    fn rec(
        hyp: &[&str],
        refs: &[Vec<&str>],
        k: usize,
        start: usize,
        acc: usize,
        cuts: &mut Vec<usize>,
        best: &mut Option<(usize, Vec<usize>)>,
    ) {
        if k + 1 == refs.len() {
            let cost = acc + edit_distance_recursive(&hyp[start..], &refs[k]);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                *best = Some((cost, cuts.clone()));
            }
            return;
        }
        for end in start..=hyp.len() {
            let c = edit_distance_recursive(&hyp[start..end], &refs[k]);
            cuts.push(end);
            rec(hyp, refs, k + 1, end, acc + c, cuts, best);
            cuts.pop();
        }
    }
    let mut best = None;
    rec(hyp, refs, 0, 0, 0, &mut Vec::new(), &mut best);
    best.expect("at least one reference")
}

/// LAAL straight from its definition, 1-based indices throughout.
pub fn laal_oracle(times: &[f64], start_s: f64, end_s: f64, ref_len: usize) -> f64 {
    let t = end_s - start_s;
    let y = times.len();
    if y == 0 {
        return t;
    }
    let mut tau = y;
    for i in 1..=y {
        if times[i - 1] - start_s >= t {
            tau = i;
            break;
        }
    }
    let denom = if y > ref_len { y } else { ref_len } as f64;
    let mut sum = 0.0;
    for i in 1..=tau {
        let d = times[i - 1] - start_s;
        sum += d - ((i - 1) as f64) * t / denom;
    }
    sum / tau as f64
}

/// (mean, median, p90, p95, p99, max) by sorting and ceil-rank lookup.
pub fn stats_oracle(values: &[f64]) -> [f64; 6] {
    let n = values.len();
    let mut mean = 0.0;
    for v in values {
        mean += v;
    }
    mean /= n as f64;
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = |p: f64| {
        let r = (p * n as f64 / 100.0).ceil() as usize;
        s[r.max(1) - 1]
    };
    let median = if n % 2 == 1 { s[n / 2] } else { s[n / 2 - 1] };
    [mean, median, rank(90.0), rank(95.0), rank(99.0), s[n - 1]]
}
