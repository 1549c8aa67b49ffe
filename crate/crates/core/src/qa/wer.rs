//! Word error rate under a minimum-edit alignment with unit costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};
use crate::text::normalize_text;

/// Splits text into words: NFC, optional Unicode case folding, then maximal
/// runs of Unicode whitespace. Punctuation stays attached to its word.
pub fn tokenize(s: &str, casefold: bool) -> Vec<String> {
    let text = normalize_text(s);
    let text = if casefold {
        normalize_text(&caseless::default_case_fold_str(&text))
    } else {
        text
    };
    text.split_whitespace().map(str::to_owned).collect()
}

/// Edit counts of one optimal alignment of a hypothesis against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordErrors {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_len: usize,
}

impl WordErrors {
    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(edits, reference_len)`, the exact rate as a fraction.
    pub fn ratio(&self) -> (usize, usize) {
        (self.edits(), self.reference_len)
    }

    pub fn rate(&self) -> f64 {
        self.edits() as f64 / self.reference_len as f64
    }
}

#[derive(Clone, Copy, Default)]
struct Cell {
    cost: usize,
    sub: usize,
    del: usize,
    ins: usize,
}

impl Cell {
    fn step(self, sub: usize, del: usize, ins: usize) -> Cell {
        Cell {
            cost: self.cost + sub + del + ins,
            sub: self.sub + sub,
            del: self.del + del,
            ins: self.ins + ins,
        }
    }
}

/// `(S + D + I) / N` where `S`, `D`, `I` come from a minimum-cost
/// alignment turning `reference` into `hypothesis` and `N = |reference|`.
///
/// Memory is linear in the hypothesis length. On cost ties the alignment
/// prefers match/substitution, then deletion, then insertion; the total is
/// the same either way.
pub fn word_error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WordErrors> {
    if reference.is_empty() {
        return Err(Error::new(ErrorCode::EmptyReference, "reference has no words"));
    }
    let mut prev: Vec<Cell> = (0..=hypothesis.len())
        .map(|j| Cell { cost: j, ins: j, ..Cell::default() })
        .collect();
    let mut cur = vec![Cell::default(); hypothesis.len() + 1];
    for r in reference {
        cur[0] = prev[0].step(0, 1, 0);
        for (j, h) in hypothesis.iter().enumerate() {
            let diag = prev[j].step(usize::from(r != h), 0, 0);
            let up = prev[j + 1].step(0, 1, 0);
            let left = cur[j].step(0, 0, 1);
            let mut best = diag;
            if up.cost < best.cost {
                best = up;
            }
            if left.cost < best.cost {
                best = left;
            }
            cur[j + 1] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let end = prev[hypothesis.len()];
    Ok(WordErrors {
        substitutions: end.sub,
        deletions: end.del,
        insertions: end.ins,
        reference_len: reference.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("The  cat", true), ["the", "cat"]);
        assert!(tokenize("", true).is_empty());
        assert!(tokenize(" \t\n ", true).is_empty());
        assert_eq!(tokenize("नमस्ते 😀", true), ["नमस्ते", "😀"]);
        assert_eq!(tokenize("Hello, World!", true), ["hello,", "world!"]);
        assert_eq!(tokenize("The  cat", false), ["The", "cat"]);
    }

    #[test]
    fn tokenizer_folds_and_composes() {
        assert_eq!(tokenize("STRASSE straße", true), ["strasse", "strasse"]);
        assert_eq!(tokenize("Cafe\u{0301}", true), ["caf\u{00e9}"]);
        // U+3000 ideographic space and U+00A0 no-break space both split
        assert_eq!(tokenize("a\u{3000}b\u{00a0}c", true), ["a", "b", "c"]);
    }

    #[test]
    fn identical_is_zero() {
        let r = words("a b c d");
        let e = word_error_rate(&r, &r).unwrap();
        assert_eq!(e.edits(), 0);
        assert_eq!(e.rate(), 0.0);
    }

    #[test]
    fn two_deletions_out_of_six() {
        let e = word_error_rate(&words("the cat sat on the mat"), &words("the cat sat mat")).unwrap();
        assert_eq!(e.ratio(), (2, 6));
        assert_eq!((e.substitutions, e.deletions, e.insertions), (0, 2, 0));
    }

    #[test]
    fn full_substitution_is_one() {
        let e = word_error_rate(&words("a b c"), &words("x y z")).unwrap();
        assert_eq!((e.substitutions, e.deletions, e.insertions), (3, 0, 0));
        assert_eq!(e.rate(), 1.0);
    }

    #[test]
    fn insertions_can_push_past_one() {
        let e = word_error_rate(&words("a"), &words("a b c")).unwrap();
        assert_eq!((e.substitutions, e.deletions, e.insertions), (0, 0, 2));
        assert_eq!(e.rate(), 2.0);
    }

    #[test]
    fn empty_reference_is_an_error() {
        let empty: [&str; 0] = [];
        assert_eq!(word_error_rate(&empty, &["a"]).unwrap_err().code, ErrorCode::EmptyReference);
        let e = word_error_rate(&["a", "b"], &empty).unwrap();
        assert_eq!((e.deletions, e.reference_len), (2, 2));
    }

    proptest! {
        #[test]
        fn rate_is_bounded(
            r in proptest::collection::vec(0u8..4, 1..12),
            h in proptest::collection::vec(0u8..4, 0..12),
        ) {
            let e = word_error_rate(&r, &h).unwrap();
            prop_assert!(e.edits() <= r.len().max(h.len()));
            prop_assert!(e.rate() <= (r.len() + h.len()) as f64 / r.len() as f64);
            prop_assert!(e.edits() >= r.len().abs_diff(h.len()));
            // deletions minus insertions accounts for the length difference
            prop_assert_eq!(r.len() as isize - e.deletions as isize + e.insertions as isize, h.len() as isize);
            prop_assert_eq!(word_error_rate(&r, &r).unwrap().edits(), 0);
        }

        #[test]
        fn edit_count_is_symmetric(
            r in proptest::collection::vec(0u8..3, 1..10),
            h in proptest::collection::vec(0u8..3, 1..10),
        ) {
            prop_assert_eq!(word_error_rate(&r, &h).unwrap().edits(), word_error_rate(&h, &r).unwrap().edits());
        }
    }
}
