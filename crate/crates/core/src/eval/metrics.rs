use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::iob::{self, Span};

/// Span match counts; add them up across utterances for corpus-level
/// (micro-averaged) scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpanCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    /// Tags rewritten by IOB repair before scoring.
    pub repairs: usize,
}

impl SpanCounts {
    pub fn add(&mut self, other: SpanCounts) {
        self.correct += other.correct;
        self.predicted += other.predicted;
        self.gold += other.gold;
        self.repairs += other.repairs;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Argument(format!(
            "{what}: {a} predictions for {b} gold labels"
        )));
    }
    Ok(())
}

fn repaired_spans<S: AsRef<str>>(tags: &[S]) -> (Vec<Span>, usize) {
    let (fixed, repairs) = iob::repair(tags);
    (
        iob::spans(&fixed).expect("repaired tags are valid"),
        repairs,
    )
}

/// Span counts of one tag sequence. Orphan `I-X` tags are read as `B-X`.
pub fn span_counts<S: AsRef<str>, T: AsRef<str>>(pred: &[S], gold: &[T]) -> Result<SpanCounts> {
    check_len("span_f1", pred.len(), gold.len())?;
    let (p, rp) = repaired_spans(pred);
    let (g, rg) = repaired_spans(gold);
    if rp + rg > 0 {
        log::debug!(
            "repaired {} predicted and {} gold tags before scoring",
            rp,
            rg
        );
    }
    let gold_set: HashSet<&Span> = g.iter().collect();
    Ok(SpanCounts {
        correct: p.iter().filter(|s| gold_set.contains(s)).count(),
        predicted: p.len(),
        gold: g.len(),
        repairs: rp + rg,
    })
}

/// `(precision, recall, f1)` over exactly matching `(type, start, end)` spans.
pub fn span_f1<S: AsRef<str>, T: AsRef<str>>(pred: &[S], gold: &[T]) -> Result<(f64, f64, f64)> {
    let c = span_counts(pred, gold)?;
    Ok((c.precision(), c.recall(), c.f1()))
}

/// Fraction of exactly equal items; 0 for empty input.
pub fn accuracy<T: PartialEq>(preds: &[T], golds: &[T]) -> Result<f64> {
    check_len("accuracy", preds.len(), golds.len())?;
    let hits = preds.iter().zip(golds).filter(|(a, b)| a == b).count();
    Ok(ratio(hits, preds.len()))
}

pub fn intent_accuracy<T: PartialEq>(preds: &[T], golds: &[T]) -> Result<f64> {
    accuracy(preds, golds)
}

/// Token-level accuracy pooled over all sequences.
pub fn info_tag_accuracy<T: PartialEq>(preds: &[Vec<T>], golds: &[Vec<T>]) -> Result<f64> {
    check_len("info_tag_accuracy", preds.len(), golds.len())?;
    let (mut hits, mut total) = (0, 0);
    for (p, g) in preds.iter().zip(golds) {
        check_len("info_tag_accuracy", p.len(), g.len())?;
        hits += p.iter().zip(g).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    Ok(ratio(hits, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    /// Enumerates every (start, end) window and keeps those that form a
    /// complete span: opener at start, continuations inside, no
    /// continuation right after.
    fn brute_spans(tags: &[String]) -> BTreeSet<(String, usize, usize)> {
        let label = |t: &str| t[2..].to_string();
        let opens = |i: usize| {
            let t = &tags[i];
            t.starts_with("B-")
                || (t.starts_with("I-")
                    && (i == 0 || tags[i - 1] == "O" || label(&tags[i - 1]) != label(t)))
        };
        let mut out = BTreeSet::new();
        for s in 0..tags.len() {
            if tags[s] == "O" || !opens(s) {
                continue;
            }
            let l = label(&tags[s]);
            for e in s + 1..=tags.len() {
                let inside = (s + 1..e).all(|k| tags[k] == format!("I-{l}"));
                let closed = e == tags.len() || tags[e] != format!("I-{l}");
                if inside && closed {
                    out.insert((l.clone(), s, e));
                }
            }
        }
        out
    }

    fn oracle(pred: &[String], gold: &[String]) -> (f64, f64, f64) {
        let (p, g) = (brute_spans(pred), brute_spans(gold));
        let c = p.intersection(&g).count() as f64;
        let prec = if p.is_empty() {
            0.0
        } else {
            c / p.len() as f64
        };
        let rec = if g.is_empty() {
            0.0
        } else {
            c / g.len() as f64
        };
        let f = if prec + rec == 0.0 {
            0.0
        } else {
            2.0 * prec * rec / (prec + rec)
        };
        (prec, rec, f)
    }

    fn tag_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("O".to_string()),
            Just("B-a".to_string()),
            Just("I-a".to_string()),
            Just("B-b".to_string()),
            Just("I-b".to_string()),
        ]
    }

    fn v(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn simple_cases() {
        let g = v("B-a I-a O B-b");
        assert_eq!(span_f1(&g, &g).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(span_f1(&v("O O O O"), &g).unwrap().2, 0.0);
        let (p, r, f) = span_f1(&v("B-a O O B-b"), &g).unwrap();
        assert_eq!((p, r), (0.5, 0.5));
        assert!((f - 0.5).abs() < 1e-15);
        assert!(span_f1(&v("O"), &g).is_err());
        assert_eq!(span_counts(&v("I-a I-a O O"), &g).unwrap().repairs, 1);
    }

    #[test]
    fn accuracies() {
        assert_eq!(intent_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(intent_accuracy(&[1, 0, 3, 0], &[1, 2, 3, 4]).unwrap(), 0.5);
        let p = ["a", "b", "c", "a", "a", "b", "c", "c", "a", "b"];
        let g = ["a", "b", "a", "a", "c", "b", "c", "a", "a", "c"];
        // hand count: positions 0,1,3,5,6,8 agree
        assert_eq!(intent_accuracy(&p, &g).unwrap(), 0.6);
        let acc = info_tag_accuracy(&[vec![1, 2], vec![3]], &[vec![1, 0], vec![3]]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert!(intent_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn two_hundred_random_pairs_match_oracle() {
        use proptest::strategy::ValueTree;
        use proptest::test_runner::{Config, TestRunner};
        let mut runner = TestRunner::new(Config {
            rng_seed: proptest::test_runner::RngSeed::Fixed(9),
            ..Config::default()
        });
        let strat = (1usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(tag_strategy(), n),
                proptest::collection::vec(tag_strategy(), n),
            )
        });
        for _ in 0..200 {
            let (p, g) = strat.new_tree(&mut runner).unwrap().current();
            assert_eq!(span_f1(&p, &g).unwrap(), oracle(&p, &g), "{p:?} {g:?}");
        }
    }

    proptest! {
        #[test]
        fn matches_oracle(
            (p, g) in (1usize..15).prop_flat_map(|n| (
                proptest::collection::vec(tag_strategy(), n),
                proptest::collection::vec(tag_strategy(), n),
            ))
        ) {
            prop_assert_eq!(span_f1(&p, &g).unwrap(), oracle(&p, &g));
            let f = span_f1(&p, &g).unwrap().2;
            let same = brute_spans(&p) == brute_spans(&g) && !brute_spans(&g).is_empty();
            prop_assert_eq!(f == 1.0, same);
        }

        #[test]
        fn relabeling_types_keeps_scores(
            (p, g) in (1usize..15).prop_flat_map(|n| (
                proptest::collection::vec(tag_strategy(), n),
                proptest::collection::vec(tag_strategy(), n),
            ))
        ) {
            let swap = |t: &String| match t.as_str() {
                "B-a" => "B-b".to_string(),
                "I-a" => "I-b".to_string(),
                "B-b" => "B-a".to_string(),
                "I-b" => "I-a".to_string(),
                o => o.to_string(),
            };
            let p2: Vec<String> = p.iter().map(swap).collect();
            let g2: Vec<String> = g.iter().map(swap).collect();
            prop_assert_eq!(span_f1(&p, &g).unwrap(), span_f1(&p2, &g2).unwrap());
        }
    }
}
