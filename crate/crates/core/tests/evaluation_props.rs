use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spurprobe_core::evaluation::{delta_report, evaluate, EvalReport, Prediction, Predictions};
use spurprobe_core::{Corpus, Example, Heuristic, Label, LabelScheme};

const ANY_LABEL: [Label; 4] = [Label::Entailment, Label::Neutral, Label::Contradiction, Label::NonEntailment];

/// Two-class corpus, every example tagged with a heuristic, plus a predicted
/// label per example drawn from all four label names.
fn two_class() -> impl Strategy<Value = (Corpus, Predictions)> {
    prop::collection::vec(
        (
            prop::sample::select(vec![Label::Entailment, Label::NonEntailment]),
            prop::sample::select(Heuristic::ALL.to_vec()),
            prop::sample::select(ANY_LABEL.to_vec()),
        ),
        1..80,
    )
    .prop_map(|rows| {
        let mut examples = Vec::new();
        let mut preds = Vec::new();
        for (i, (gold, h, p)) in rows.into_iter().enumerate() {
            let id = format!("h{i}");
            examples.push(Example {
                id: id.clone(),
                premise: "p".into(),
                hypothesis: "h".into(),
                label: gold,
                heuristic: Some(h),
            });
            preds.push(Prediction { id, label: p, logits: None });
        }
        (
            Corpus::new("hans", LabelScheme::TwoClass, examples).unwrap(),
            Predictions::new(preds).unwrap(),
        )
    })
}

/// (gold, predicted) class indices under three_class.
fn three_class_rows() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..3, 0usize..3), 1..60)
}

fn three_class(rows: &[(usize, usize)]) -> (Corpus, Predictions) {
    let labels = LabelScheme::ThreeClass.labels();
    let mut examples = Vec::new();
    let mut preds = Vec::new();
    for (i, &(g, q)) in rows.iter().enumerate() {
        let id = format!("m{i}");
        examples.push(Example {
            id: id.clone(),
            premise: "p".into(),
            hypothesis: "h".into(),
            label: labels[g],
            heuristic: None,
        });
        preds.push(Prediction { id, label: labels[q], logits: None });
    }
    (
        Corpus::new("mnli", LabelScheme::ThreeClass, examples).unwrap(),
        Predictions::new(preds).unwrap(),
    )
}

fn both_labels(c: &Corpus) -> bool {
    [Label::Entailment, Label::NonEntailment]
        .iter()
        .all(|l| c.examples.iter().any(|e| e.label == *l))
}

fn acc(r: &EvalReport, l: Label) -> f64 {
    r.label_accuracy(l).unwrap()
}

proptest! {
    #[test]
    fn headline_is_mean_of_label_accuracies((c, p) in two_class()) {
        prop_assume!(both_labels(&c));
        let r = evaluate(&c, &p).unwrap();
        prop_assert_eq!(r.headline, (acc(&r, Label::Entailment) + acc(&r, Label::NonEntailment)) / 2.0);
        prop_assert!(r.per_label.iter().all(|s| s.accuracy.map_or(true, |a| (0.0..=1.0).contains(&a))));
        prop_assert!(r.headline_note.is_none());
    }

    #[test]
    fn constant_predictor_scores_half((c, _) in two_class(), label in prop::sample::select(ANY_LABEL.to_vec())) {
        prop_assume!(both_labels(&c));
        let p = Predictions::new(c.ids().map(|id| Prediction { id: id.into(), label, logits: None }).collect()).unwrap();
        prop_assert_eq!(evaluate(&c, &p).unwrap().headline, 0.5);
    }

    #[test]
    fn order_does_not_matter((c, p) in two_class(), seed in any::<u64>()) {
        let mut shuffled = c.clone();
        shuffled.examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut items: Vec<Prediction> = p.iter().cloned().collect();
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let a = evaluate(&c, &p).unwrap();
        let b = evaluate(&shuffled, &Predictions::new(items).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn heuristic_subsets_recompose((c, p) in two_class()) {
        let r = evaluate(&c, &p).unwrap();
        for overall in &r.per_label {
            let mut n = 0;
            let mut weighted = 0.0;
            for h in &r.per_heuristic {
                let s = h.per_label.iter().find(|s| s.label == overall.label).unwrap();
                n += s.n;
                weighted += s.n as f64 * s.accuracy.unwrap_or(0.0);
            }
            prop_assert_eq!(n, overall.n);
            if let Some(a) = overall.accuracy {
                prop_assert!((weighted / n as f64 - a).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn three_class_headline_is_plain_accuracy(rows in three_class_rows()) {
        let (c, p) = three_class(&rows);
        let r = evaluate(&c, &p).unwrap();
        let hits = rows.iter().filter(|(g, q)| g == q).count();
        prop_assert_eq!(r.headline, hits as f64 / rows.len() as f64);
        prop_assert_eq!(r.accuracy, r.headline);
    }

    #[test]
    fn self_delta_is_zero(rows in three_class_rows()) {
        let (c, p) = three_class(&rows);
        let r = evaluate(&c, &p).unwrap();
        prop_assume!(r.per_label.iter().all(|s| s.n > 0));
        let d = delta_report(&r, &r).unwrap();
        prop_assert_eq!(d.rows.len(), 3);
        prop_assert!(d.rows.iter().all(|row| row.points == 0.0));
    }
}
