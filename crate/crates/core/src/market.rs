//! The alien market: a shop that refuses any item containing certain letters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Public 10,000-word English list the corpus statistics are quoted for.
pub const WORDLIST_URL: &str = "https://www.mit.edu/~ecprice/wordlist.10000";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarketError {
    #[error("empty word list")]
    EmptyCorpus,
    #[error("a rule needs at least one forbidden letter")]
    EmptyRule,
    #[error("'{0}' is not a letter")]
    NotALetter(char),
}

/// Items containing any forbidden letter (case-insensitive) cannot be bought.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketRule {
    forbidden: BTreeSet<char>,
}

impl Default for MarketRule {
    fn default() -> Self {
        MarketRule {
            forbidden: ['m', 'p'].into_iter().collect(),
        }
    }
}

fn letter_set(letters: &str) -> Result<BTreeSet<char>, MarketError> {
    letters
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| {
            if c.is_alphabetic() {
                Ok(c.to_lowercase().next().unwrap_or(c))
            } else {
                Err(MarketError::NotALetter(c))
            }
        })
        .collect()
}

impl MarketRule {
    /// Rule from a string of letters such as `"mp"` or `"m, p"`.
    pub fn from_letters(letters: &str) -> Result<MarketRule, MarketError> {
        let forbidden = letter_set(letters)?;
        if forbidden.is_empty() {
            return Err(MarketError::EmptyRule);
        }
        Ok(MarketRule { forbidden })
    }

    pub fn forbidden(&self) -> &BTreeSet<char> {
        &self.forbidden
    }
}

/// Letters a player claims are forbidden.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LetterHypothesis {
    pub claimed: BTreeSet<char>,
}

impl LetterHypothesis {
    pub fn from_letters(letters: &str) -> Result<LetterHypothesis, MarketError> {
        Ok(LetterHypothesis {
            claimed: letter_set(letters)?,
        })
    }
}

/// Can this item be bought?
pub fn market_query(item: &str, rule: &MarketRule) -> bool {
    !item
        .chars()
        .flat_map(char::to_lowercase)
        .any(|c| rule.forbidden.contains(&c))
}

/// Frequencies over a word list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub words: usize,
    /// Fraction of words the rule rejects.
    pub p_reject: f64,
    /// Fraction of words containing each letter a–z.
    pub letter: BTreeMap<char, f64>,
    /// `1 - Π(1 - P(letter))` over the rule's letters; equals `p_reject`
    /// only if the letters occur independently.
    pub independent_estimate: f64,
}

/// Read a word list, one word per line; blank lines are skipped.
pub fn parse_wordlist(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn corpus_stats<S: AsRef<str>>(words: &[S], rule: &MarketRule) -> Result<CorpusStats, MarketError> {
    if words.is_empty() {
        return Err(MarketError::EmptyCorpus);
    }
    let n = words.len() as f64;
    let mut counts: BTreeMap<char, usize> = ('a'..='z').map(|c| (c, 0)).collect();
    let mut rejected = 0usize;
    for w in words {
        let w = w.as_ref();
        let seen: BTreeSet<char> = w.chars().flat_map(char::to_lowercase).collect();
        for c in &seen {
            if let Some(k) = counts.get_mut(c) {
                *k += 1;
            }
        }
        if !market_query(w, rule) {
            rejected += 1;
        }
    }
    let letter: BTreeMap<char, f64> = counts.into_iter().map(|(c, k)| (c, k as f64 / n)).collect();
    let keep: f64 = rule
        .forbidden
        .iter()
        .map(|c| 1.0 - letter.get(c).copied().unwrap_or(0.0))
        .product();
    Ok(CorpusStats {
        words: words.len(),
        p_reject: rejected as f64 / n,
        letter,
        independent_estimate: 1.0 - keep,
    })
}

/// One point per correctly named letter, minus half a point per wrong one.
/// Naming no correct letter at all scores zero.
pub fn score_hypothesis(h: &LetterHypothesis, truth: &MarketRule) -> f64 {
    let correct = h.claimed.iter().filter(|c| truth.forbidden.contains(c)).count();
    if correct == 0 {
        return 0.0;
    }
    let wrong = h.claimed.len() - correct;
    correct as f64 - 0.5 * wrong as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn claim(s: &str) -> LetterHypothesis {
        LetterHypothesis::from_letters(s).unwrap()
    }

    #[test]
    fn queries() {
        let rule = MarketRule::default();
        assert!(!market_query("apple", &rule));
        assert!(!market_query("APPLE", &rule));
        assert!(!market_query("Mango", &rule));
        assert!(market_query("word", &rule));
        assert!(market_query("", &rule));
    }

    #[test]
    fn rules_parse() {
        assert_eq!(MarketRule::from_letters("P, M").unwrap(), MarketRule::default());
        assert_eq!(MarketRule::from_letters(""), Err(MarketError::EmptyRule));
        assert_eq!(MarketRule::from_letters("m1"), Err(MarketError::NotALetter('1')));
    }

    #[test]
    fn scoring() {
        let truth = MarketRule::default();
        assert_eq!(score_hypothesis(&claim("mp"), &truth), 2.0);
        assert_eq!(score_hypothesis(&claim("pml"), &truth), 1.5);
        assert_eq!(score_hypothesis(&claim("pl"), &truth), 0.5);
        assert_eq!(score_hypothesis(&claim("xyz"), &truth), 0.0);
        assert_eq!(score_hypothesis(&claim(""), &truth), 0.0);
    }

    #[test]
    fn small_corpora() {
        let rule = MarketRule::from_letters("a").unwrap();
        assert_eq!(corpus_stats(&["aa"], &rule).unwrap().p_reject, 1.0);
        assert_eq!(corpus_stats::<&str>(&[], &rule), Err(MarketError::EmptyCorpus));
        let words = ["map", "pen", "mom", "cat"];
        let s = corpus_stats(&words, &MarketRule::default()).unwrap();
        assert_eq!(s.p_reject, 0.75);
        assert_eq!(s.letter[&'p'], 0.5);
        assert_eq!(s.letter[&'m'], 0.5);
        assert!((s.independent_estimate - 0.75).abs() < 1e-12);
        // letters that always co-occur: independence overestimates rejection
        let s = corpus_stats(&["amp", "cat"], &MarketRule::default()).unwrap();
        assert_eq!(s.p_reject, 0.5);
        assert!((s.independent_estimate - 0.75).abs() < 1e-12);
        assert_eq!(parse_wordlist("a\n\n b \n"), vec!["a", "b"]);
    }

    proptest! {
        #[test]
        fn case_invariant(item in "[a-zA-Z]{0,12}") {
            let rule = MarketRule::default();
            prop_assert_eq!(market_query(&item, &rule), market_query(&item.to_uppercase(), &rule));
            prop_assert_eq!(market_query(&item, &rule), market_query(&item.to_lowercase(), &rule));
        }

        #[test]
        fn score_monotone(letters in "[a-z]{0,8}", extra in "[a-z]") {
            let truth = MarketRule::default();
            let h = claim(&letters);
            let base = score_hypothesis(&h, &truth);
            let c = extra.chars().next().unwrap();
            let mut h2 = h.clone();
            let added = h2.claimed.insert(c);
            let after = score_hypothesis(&h2, &truth);
            let has_correct = h.claimed.iter().any(|x| truth.forbidden().contains(x));
            let spurious = h.claimed.iter().filter(|x| !truth.forbidden().contains(x)).count();
            if truth.forbidden().contains(&c) && (has_correct || spurious <= 2) {
                // the first correct letter lifts a zero score only while
                // it outweighs the wrong claims
                prop_assert!(after >= base);
            } else if added && has_correct {
                prop_assert_eq!(after, base - 0.5);
            }
            let perfect = LetterHypothesis { claimed: truth.forbidden().clone() };
            prop_assert_eq!(score_hypothesis(&perfect, &truth), truth.forbidden().len() as f64);
        }
    }
}
