//! Pronounceable pseudo-words, unique across a catalog.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "tr", "pl", "gr", "st", "br", "kl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ei"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "s", "k", "m"];

#[derive(Default, Debug)]
pub struct WordPool {
    used: HashSet<String>,
}

impl WordPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// A word not handed out before, of two to three syllables.
    pub fn fresh<R: Rng + ?Sized>(&mut self, rng: &mut R) -> String {
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).expect("non-empty"));
                w.push_str(VOWELS.choose(rng).expect("non-empty"));
                w.push_str(CODAS.choose(rng).expect("non-empty"));
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    pub fn fresh_n<R: Rng + ?Sized>(&mut self, rng: &mut R, n: usize) -> Vec<String> {
        (0..n).map(|_| self.fresh(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn words_are_unique_lowercase_ascii() {
        let mut pool = WordPool::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let words = pool.fresh_n(&mut rng, 3000);
        let set: HashSet<_> = words.iter().collect();
        assert_eq!(set.len(), words.len());
        assert!(words.iter().all(|w| w.len() >= 4 && w.bytes().all(|b| b.is_ascii_lowercase())));
    }
}
