use proptest::prelude::*;
use simulst_core::policy::{agreed_prefix_len, ralcp_emit, votes_needed, RalcpConfig, VoteBar};
use simulst_core::textnorm::MatchConfig;
use simulst_core::types::{BeamHypothesis, BeamSet, SEP};
use simulst_testkit::oracle::ralcp_oracle;

fn tokens() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c"), Just(SEP)], 0..6)
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

fn beam_set(prefix: &[String], conts: &[Vec<String>], requested: usize) -> BeamSet {
    BeamSet {
        beams: conts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let tokens: Vec<String> = prefix.iter().chain(c).cloned().collect();
                BeamHypothesis {
                    attention: vec![vec![1.0]; tokens.len()],
                    tokens,
                    score: -(i as f64),
                }
            })
            .collect(),
        requested_size: requested,
    }
}

proptest! {
    #[test]
    fn exact_agreement_is_plain_lcp(a in tokens(), b in tokens(), skip in 0usize..3) {
        let n = agreed_prefix_len(&a, &b, skip, &MatchConfig::exact());
        // Matching resumes at the committed offset.
        let mut expect = skip;
        while expect < a.len() && expect < b.len() && a[expect] == b[expect] {
            expect += 1;
        }
        prop_assert_eq!(n, expect);
        if skip == 0 {
            let lcp = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
            prop_assert_eq!(n, lcp);
        }
    }

    #[test]
    fn agreement_skips_committed(a in tokens(), b in tokens(), skip in 0usize..8) {
        let n = agreed_prefix_len(&a, &b, skip, &MatchConfig::default());
        prop_assert!(n >= skip);
        prop_assert!(n == skip || n <= a.len().min(b.len()));
    }

    #[test]
    fn ralcp_matches_oracle_with_committed_prefix(
        prefix in tokens().prop_map(|t| t.into_iter().filter(|x| x != SEP).collect::<Vec<_>>()),
        conts in proptest::collection::vec(tokens(), 1..8),
        lambda_num in 1usize..=4,
        extra in 0usize..3,
        filter in any::<bool>(),
    ) {
        let lambda = lambda_num as f64 / 4.0;
        let requested = conts.len() + extra;
        let cfg = RalcpConfig { lambda, beam_size: requested, filter_empty: filter, vote_bar: VoteBar::PreserveAbsolute };
        let got = ralcp_emit(&beam_set(&prefix, &conts, requested), prefix.len(), &cfg);
        let needed = (lambda_num * requested).div_ceil(4);
        let views: Vec<Vec<&str>> = conts.iter().map(|c| c.iter().map(String::as_str).collect()).collect();
        prop_assert_eq!(got, ralcp_oracle(&views, needed, filter, SEP));
    }

    #[test]
    fn full_bar_with_identical_beams_is_lcp(cont in tokens(), n in 1usize..6) {
        let conts = vec![cont.clone(); n];
        let cfg = RalcpConfig { lambda: 1.0, beam_size: n, ..RalcpConfig::default() };
        let got = ralcp_emit(&beam_set(&[], &conts, n), 0, &cfg);
        let end = cont.iter().position(|t| t == SEP).map_or(cont.len(), |p| p + 1);
        prop_assert_eq!(got, cont[..end].to_vec());
    }

    #[test]
    fn emissions_append_only(conts in proptest::collection::vec(tokens(), 1..6), steps in 1usize..5) {
        // replaying with the emitted tokens as committed never contradicts earlier output
        let cfg = RalcpConfig { beam_size: conts.len(), ..RalcpConfig::default() };
        let mut committed: Vec<String> = Vec::new();
        for _ in 0..steps {
            let live: Vec<Vec<String>> = conts
                .iter()
                .filter(|c| c.len() >= committed.len() && c[..committed.len()] == committed[..])
                .map(|c| c[committed.len()..].to_vec())
                .collect();
            let out = ralcp_emit(&beam_set(&committed, &live, conts.len()), committed.len(), &cfg);
            if out.is_empty() || out.last().map(String::as_str) == Some(SEP) {
                break;
            }
            committed.extend(out);
        }
        for c in &committed {
            prop_assert_ne!(c.as_str(), SEP);
        }
    }

    #[test]
    fn votes_needed_is_exact_ceiling(num in 1usize..=20, n in 1usize..=40) {
        prop_assert_eq!(votes_needed(num as f64 / 20.0, n), (num * n).div_ceil(20));
    }
}
