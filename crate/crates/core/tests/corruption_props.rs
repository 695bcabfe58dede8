use proptest::prelude::*;
use spurprobe_core::corruption::{
    apply_op, content_words, corrupt, corrupt_example, CorruptionConfig, Strategy as Op, WordEdit,
};
use spurprobe_core::{Example, Label};

const WORDS: &[&str] = &[
    "the", "a", "of", "and", "is", "was", "to", "I", "x", "7", "--", "...", "doctor", "lawyer", "think'", "don't",
    "saw", "bank,", "(river)", "\"quoted\"", "naïve", "café.", "AA", "ab", "zz", "e-mail", "mississippi", "42nd",
];
const GAPS: &[&str] = &[" ", " ", " ", "  ", "\t", "\n", " \u{a0}"];

fn sentence() -> impl Strategy<Value = String> {
    (
        prop::collection::vec((prop::sample::select(WORDS), prop::sample::select(GAPS)), 0..25),
        prop::sample::select(vec!["", " ", "\n"]),
    )
        .prop_map(|(parts, lead)| {
            let mut s = lead.to_string();
            for (w, g) in parts {
                s.push_str(w);
                s.push_str(g);
            }
            s
        })
}

fn config() -> impl Strategy<Value = CorruptionConfig> {
    (
        prop::sample::select(vec![Op::Insert, Op::Substitute, Op::Swap, Op::Delete]),
        0.01f64..=1.0,
        any::<u64>(),
        prop::sample::select(vec!["ab", "abcdefghijklmnopqrstuvwxyz", "xyz0", "éü"]),
    )
        .prop_map(|(strategy, word_rate, seed, chars)| CorruptionConfig {
            strategy,
            word_rate,
            seed,
            charset: chars.chars().collect(),
            ..CorruptionConfig::default()
        })
}

/// Alternating runs of whitespace and non-whitespace.
fn runs(s: &str) -> Vec<(bool, String)> {
    let mut out: Vec<(bool, String)> = Vec::new();
    for c in s.chars() {
        let ws = c.is_whitespace();
        match out.last_mut() {
            Some((w, run)) if *w == ws => run.push(c),
            _ => out.push((ws, c.to_string())),
        }
    }
    out
}

fn check(text: &str, out: &str, edits: &[WordEdit], config: &CorruptionConfig) -> Result<(), TestCaseError> {
    let n = content_words(text).len();
    let want = if n == 0 { 0 } else { ((config.word_rate * n as f64).round() as usize).clamp(1, n) };
    prop_assert_eq!(edits.len(), want);

    let (a, b) = (runs(text), runs(out));
    prop_assert_eq!(a.len(), b.len());
    let mut token = 0;
    for ((wa, ra), (wb, rb)) in a.iter().zip(&b) {
        prop_assert_eq!(wa, wb);
        if *wa {
            prop_assert_eq!(ra, rb);
            continue;
        }
        match edits.iter().find(|e| e.index == token) {
            Some(e) => {
                prop_assert_eq!(&e.original, ra);
                prop_assert_eq!(&e.corrupted, rb);
                prop_assert_ne!(ra, rb);
                prop_assert_eq!(apply_op(ra, e.op), rb.clone());
            }
            None => prop_assert_eq!(ra, rb),
        }
        token += 1;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn corrupts_exactly_the_chosen_words(text in sentence(), config in config()) {
        let (out, edits) = corrupt(&text, &config).unwrap();
        check(&text, &out, &edits, &config)?;
        prop_assert_eq!(corrupt(&text, &config).unwrap(), (out, edits));
    }

    #[test]
    fn fields_are_corrupted_independently(
        premise in sentence(), hypothesis in sentence(), config in config(), id in "[a-z0-9]{1,8}",
    ) {
        prop_assume!(!premise.is_empty() && !hypothesis.is_empty());
        let ex = Example { id, premise, hypothesis, label: Label::Neutral, heuristic: None };
        let (out, record) = corrupt_example(&ex, &config).unwrap();
        check(&ex.premise, &out.premise, &record.premise, &config)?;
        check(&ex.hypothesis, &out.hypothesis, &record.hypothesis, &config)?;
        prop_assert_eq!((&out.id, out.label), (&ex.id, ex.label));
        let again = corrupt_example(&ex, &config).unwrap();
        prop_assert_eq!(again, (out, record));
    }
}
