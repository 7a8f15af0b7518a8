//! String similarity metrics used by soft match predicates.
//!
//! All metrics return a score in [0, 1]. By convention two empty strings
//! score 0, and identical non-empty strings score 1.

use std::collections::BTreeSet;

use crate::error::{ErldError, Result};

/// Metric selector, as named in rule and schema configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Jaccard,
    Overlap,
    Cosine,
    JaroWinkler,
    Soundex,
}

impl Metric {
    pub fn parse(name: &str) -> Result<Metric> {
        match name {
            "jaccard" => Ok(Metric::Jaccard),
            "overlap" => Ok(Metric::Overlap),
            "cosine" => Ok(Metric::Cosine),
            "jaro_winkler" => Ok(Metric::JaroWinkler),
            "soundex" => Ok(Metric::Soundex),
            other => Err(ErldError::Config(format!("unknown metric {other}"))),
        }
    }

    pub fn score(self, a: &str, b: &str) -> f64 {
        similarity(self, a, b)
    }
}

/// Scores two strings under the chosen metric.
pub fn similarity(metric: Metric, a: &str, b: &str) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    match metric {
        Metric::Jaccard => token_jaccard(a, b),
        Metric::Overlap => token_overlap(a, b),
        Metric::Cosine => token_cosine(a, b),
        Metric::JaroWinkler => jaro_winkler(a, b),
        Metric::Soundex => {
            if soundex_code(a) == soundex_code(b) {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn tokens(s: &str) -> BTreeSet<&str> {
    s.split_whitespace().collect()
}

fn token_jaccard(a: &str, b: &str) -> f64 {
    let ta = tokens(a);
    let tb = tokens(b);
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

fn token_overlap(a: &str, b: &str) -> f64 {
    let ta = tokens(a);
    let tb = tokens(b);
    let smaller = ta.len().min(tb.len());
    if smaller == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / smaller as f64
}

fn token_cosine(a: &str, b: &str) -> f64 {
    let ta = tokens(a);
    let tb = tokens(b);
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let shared = ta.intersection(&tb).count() as f64;
    shared / ((ta.len() * tb.len()) as f64).sqrt()
}

/// Jaro similarity over characters.
pub fn jaro(a: &str, b: &str) -> f64 {
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    if ca == cb {
        return 1.0;
    }
    let window = (ca.len().max(cb.len()) / 2).saturating_sub(1);
    let mut matched_b = vec![false; cb.len()];
    let mut matches_a: Vec<char> = Vec::new();
    for (i, &ch) in ca.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(cb.len());
        for j in lo..hi {
            if !matched_b[j] && cb[j] == ch {
                matched_b[j] = true;
                matches_a.push(ch);
                break;
            }
        }
    }
    let m = matches_a.len();
    if m == 0 {
        return 0.0;
    }
    let matches_b: Vec<char> = cb
        .iter()
        .zip(matched_b.iter())
        .filter(|(_, &used)| used)
        .map(|(&ch, _)| ch)
        .collect();
    // Half the out-of-order positions; the count may be odd, so keep the half.
    let t = matches_a
        .iter()
        .zip(matches_b.iter())
        .filter(|(x, y)| x != y)
        .count() as f64
        / 2.0;
    let m = m as f64;
    (m / ca.len() as f64 + m / cb.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler: Jaro plus a bounded boost for a shared prefix.
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let base = jaro(a, b);
    if base <= 0.7 {
        return base;
    }
    let prefix = a
        .chars()
        .zip(b.chars())
        .take(4)
        .take_while(|(x, y)| x == y)
        .count();
    base + prefix as f64 * 0.1 * (1.0 - base)
}

/// American Soundex code: initial letter plus three consonant digits.
pub fn soundex_code(s: &str) -> String {
    fn digit(c: char) -> Option<char> {
        match c {
            'b' | 'f' | 'p' | 'v' => Some('1'),
            'c' | 'g' | 'j' | 'k' | 'q' | 's' | 'x' | 'z' => Some('2'),
            'd' | 't' => Some('3'),
            'l' => Some('4'),
            'm' | 'n' => Some('5'),
            'r' => Some('6'),
            _ => None,
        }
    }
    let letters: Vec<char> = s
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let Some(&first) = letters.first() else {
        return String::new();
    };
    let mut code = String::new();
    code.push(first.to_ascii_uppercase());
    let mut prev = digit(first);
    for &c in &letters[1..] {
        let d = digit(c);
        match d {
            Some(d) => {
                if prev != Some(d) {
                    code.push(d);
                    if code.len() == 4 {
                        break;
                    }
                }
                prev = Some(d);
            }
            None => {
                // Vowels reset the run; h and w are transparent.
                if c != 'h' && c != 'w' {
                    prev = None;
                }
            }
        }
    }
    while code.len() < 4 {
        code.push('0');
    }
    code
}
