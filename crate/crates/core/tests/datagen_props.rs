use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simulst_core::datagen::{draw_rng, gen_sample, generate, Document, GenConfig, SentencePair};
use simulst_core::types::SEP;
use simulst_testkit::gen;

fn doc(seed: u64, n: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Document {
        id: format!("d{seed}"),
        pairs: (0..n)
            .map(|_| SentencePair {
                source: gen::sentence(&mut rng, 1, 9),
                target: gen::sentence(&mut rng, 1, 9).iter().map(|w| w.to_uppercase()).collect(),
            })
            .collect(),
    }
}

fn sep_split(text: &str) -> Vec<Vec<&str>> {
    text.split(&format!(" {SEP} ")).map(|s| s.split(' ').collect()).collect()
}

proptest! {
    #[test]
    fn samples_are_well_formed(seed in any::<u64>(), n in 2usize..15, min_c in 1usize..4, extra in 0usize..8, idx in 0u64..1000, rate in 0.0f64..=1.0) {
        let d = doc(seed, n);
        let cfg = GenConfig { min_context: min_c, max_context: min_c + extra, prefix_rate: rate, seed };
        let s = gen_sample(&d, &cfg, &mut draw_rng(seed, idx)).unwrap();
        let src = sep_split(&s.source);
        let tgt = sep_split(&s.target);
        prop_assert_eq!(src.len(), tgt.len());
        prop_assert_eq!(src.len() - 1, s.context);
        prop_assert!(s.context >= 1 && s.context <= cfg.max_context);
        if !s.clamped {
            prop_assert!(s.context >= cfg.min_context);
        }
        let pair = &d.pairs[s.sentence_index];
        let (a_src, a_tgt) = (src.last().unwrap(), tgt.last().unwrap());
        prop_assert!(pair.source.starts_with(&a_src.iter().map(|w| w.to_string()).collect::<Vec<_>>()));
        prop_assert!(pair.target.starts_with(&a_tgt.iter().map(|w| w.to_string()).collect::<Vec<_>>()));
        if !s.prefixed {
            prop_assert_eq!(a_src.len(), pair.source.len());
            prop_assert_eq!(a_tgt.len(), pair.target.len());
        }
        let again = gen_sample(&d, &cfg, &mut draw_rng(seed, idx)).unwrap();
        prop_assert_eq!(again, s);
    }
}

#[test]
fn prefix_rate_extremes() {
    let docs: Vec<Document> = (0..5).map(|i| doc(i, 6)).collect();
    let (none, st) = generate(&docs, &GenConfig { prefix_rate: 0.0, ..GenConfig::default() }, 300).unwrap();
    assert_eq!(st.prefixed, 0);
    assert!(none.iter().all(|s| !s.prefixed));
    let (all, st) = generate(&docs, &GenConfig { prefix_rate: 1.0, ..GenConfig::default() }, 300).unwrap();
    assert_eq!(st.prefixed, 300);
    assert!(all.iter().all(|s| s.prefixed));
}
