//! Symbol alphabet and admissibility structure of the natural coding:
//! words over `1..k0` with no two consecutive symbols equal, necklaces
//! (rotation classes of cyclic words), and primitive-orbit combinatorics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An admissible word over the alphabet `1..=k0`. Adjacent symbols are
/// distinct; cyclic words additionally have `last != first`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<usize>,
    cyclic: bool,
}

impl Word {
    pub fn linear(symbols: Vec<usize>) -> Result<Self> {
        Word::build(symbols, false)
    }

    pub fn cyclic(symbols: Vec<usize>) -> Result<Self> {
        Word::build(symbols, true)
    }

    fn build(symbols: Vec<usize>, cyclic: bool) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Domain("empty word".into()));
        }
        if symbols.contains(&0) {
            return Err(Error::Domain("symbols are 1-based".into()));
        }
        for w in symbols.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Domain(format!(
                    "repeated adjacent symbol {} in word",
                    w[0]
                )));
            }
        }
        if cyclic && symbols.len() == 1 {
            return Err(Error::Domain(
                "no admissible cyclic word of length 1".into(),
            ));
        }
        if cyclic && symbols[symbols.len() - 1] == symbols[0] {
            return Err(Error::Domain(
                "cyclic word has equal first and last symbols".into(),
            ));
        }
        Ok(Word { symbols, cyclic })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    /// Left rotation by `r` places (cyclic words only).
    pub fn rotated(&self, r: usize) -> Word {
        assert!(self.cyclic, "rotation of a non-cyclic word");
        let n = self.symbols.len();
        let symbols = (0..n).map(|i| self.symbols[(i + r) % n]).collect();
        Word {
            symbols,
            cyclic: true,
        }
    }

    /// Orientation reversal.
    pub fn reversed(&self) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.reverse();
        Word {
            symbols,
            cyclic: self.cyclic,
        }
    }

    /// Lexicographically minimal rotation (cyclic words only).
    pub fn canonical_rotation(&self) -> Word {
        assert!(self.cyclic);
        let n = self.symbols.len();
        (0..n)
            .map(|r| self.rotated(r))
            .min_by(|a, b| a.symbols.cmp(&b.symbols))
            .expect("nonempty")
    }

    /// True when no proper rotation fixes the word.
    pub fn is_primitive(&self) -> bool {
        let n = self.symbols.len();
        for d in 1..n {
            if n.is_multiple_of(d) && (0..n).all(|i| self.symbols[i] == self.symbols[i % d]) {
                return false;
            }
        }
        true
    }

    /// Drops the first symbol (the one-sided shift on cylinder labels).
    pub fn shifted(&self) -> Option<Word> {
        if self.symbols.len() <= 1 {
            return None;
        }
        Some(Word {
            symbols: self.symbols[1..].to_vec(),
            cyclic: false,
        })
    }

    /// Hyphen-separated rendering, e.g. `1-2-3`.
    pub fn label(&self) -> String {
        self.symbols
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// Parses `1-2-3`, `1,2,3` or `123` (the digit form only for k0 <= 9).
    pub fn parse(text: &str, cyclic: bool) -> Result<Word> {
        let symbols: Vec<usize> = if text.contains('-') || text.contains(',') {
            text.split(['-', ','])
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Domain(format!("bad symbol {p:?}")))
                })
                .collect::<Result<_>>()?
        } else {
            text.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::Domain(format!("bad symbol {c:?}")))
                })
                .collect::<Result<_>>()?
        };
        Word::build(symbols, cyclic)
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// A rotation class of admissible cyclic words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Necklace {
    /// Lexicographically minimal rotation.
    pub representative: Word,
    pub period: usize,
    pub primitive: bool,
}

/// All admissible words of the given length, in lexicographic order.
pub fn enumerate_words(k0: usize, length: usize, cyclic: bool) -> Vec<Word> {
    assert!(k0 >= 3, "alphabet needs at least 3 symbols");
    assert!(length >= 1);
    let mut out = Vec::new();
    let mut stack = vec![Vec::<usize>::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == length {
            if !cyclic || prefix[length - 1] != prefix[0] {
                out.push(Word {
                    symbols: prefix,
                    cyclic,
                });
            }
            continue;
        }
        // Push in reverse so the DFS emits lexicographic order.
        for s in (1..=k0).rev() {
            if prefix.last() != Some(&s) {
                let mut next = prefix.clone();
                next.push(s);
                stack.push(next);
            }
        }
    }
    out
}

/// One representative per rotation class of primitive admissible cyclic
/// words of the given period, in lexicographic order.
pub fn primitive_necklaces(k0: usize, period: usize) -> Vec<Necklace> {
    if period < 2 {
        return Vec::new();
    }
    enumerate_words(k0, period, true)
        .into_iter()
        .filter(|w| w.is_primitive())
        .filter(|w| w.canonical_rotation().symbols == w.symbols)
        .map(|w| Necklace {
            representative: w,
            period,
            primitive: true,
        })
        .collect()
}

/// The `k0 - 1` one-symbol extensions `j . w`, `j != w_0`, truncated back to
/// the length of `w`: the shift preimages of the cylinder labeled by `w`.
pub fn preimage_words(word: &Word, k0: usize) -> Vec<Word> {
    assert!(!word.cyclic, "preimages act on cylinder (non-cyclic) words");
    let n = word.symbols.len();
    (1..=k0)
        .filter(|&j| j != word.symbols[0])
        .map(|j| {
            let mut symbols = Vec::with_capacity(n);
            symbols.push(j);
            symbols.extend_from_slice(&word.symbols[..n - 1]);
            Word {
                symbols,
                cyclic: false,
            }
        })
        .collect()
}

/// Number of admissible cyclic words of length `n`:
/// `(k0-1)^n + (-1)^n (k0-1)` for `n >= 2`.
pub fn cyclic_word_count(k0: usize, n: usize) -> i64 {
    let k = (k0 - 1) as i64;
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    k.pow(n as u32) + sign * k
}
