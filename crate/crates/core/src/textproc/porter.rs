//! Porter stemmer over lowercase ASCII words.
//!
//! This follows the maintained reference formulation of the algorithm (the
//! one the distributed test vocabulary is generated from), which differs
//! from the 1980 paper in three places: words of length 1 or 2 are left
//! alone, step 2 maps "bli" to "ble" rather than "abli" to "able", and
//! step 2 gains "logi" to "log". Stemming is not idempotent in general.

/// Returns the Porter stem of a lowercase token. Tokens containing
/// non-ASCII characters are returned unchanged.
pub fn stem(token: &str) -> String {
    if !token.is_ascii() {
        return token.to_string();
    }
    let mut word = Stem {
        buf: token.as_bytes().to_vec(),
    };
    // Words of length 1 or 2 are not stemmed.
    if word.buf.len() > 2 {
        word.step1a();
        word.step1b();
        word.step1c();
        word.step2();
        word.step3();
        word.step4();
        word.step5();
    }
    String::from_utf8(word.buf).expect("ascii in, ascii out")
}

struct Stem {
    buf: Vec<u8>,
}

impl Stem {
    fn is_consonant(&self, i: usize) -> bool {
        match self.buf[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Number of vowel-consonant transitions in `self.buf[..len]`, the m of
    /// the [C](VC)^m[V] decomposition.
    fn measure(&self, len: usize) -> usize {
        let mut i = 0;
        while i < len && self.is_consonant(i) {
            i += 1;
        }
        let mut m = 0;
        loop {
            while i < len && !self.is_consonant(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
            m += 1;
            while i < len && self.is_consonant(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    fn ends_double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.buf[len - 1] == self.buf[len - 2] && self.is_consonant(len - 1)
    }

    /// consonant-vowel-consonant ending where the final consonant is not
    /// w, x or y; triggers restoration of a trailing e.
    fn ends_cvc(&self, len: usize) -> bool {
        if len < 3
            || !self.is_consonant(len - 1)
            || self.is_consonant(len - 2)
            || !self.is_consonant(len - 3)
        {
            return false;
        }
        !matches!(self.buf[len - 1], b'w' | b'x' | b'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        self.buf.ends_with(suffix.as_bytes())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.buf.len() - suffix.len()
    }

    fn replace(&mut self, suffix: &str, with: &str) {
        let at = self.stem_len(suffix);
        self.buf.truncate(at);
        self.buf.extend_from_slice(with.as_bytes());
    }

    /// Plural reduction: sses -> ss, ies -> i, s -> (dropped unless ss).
    fn step1a(&mut self) {
        if self.ends_with("sses") {
            self.replace("sses", "ss");
        } else if self.ends_with("ies") {
            self.replace("ies", "i");
        } else if !self.ends_with("ss") && self.ends_with("s") {
            self.buf.pop();
        }
    }

    /// Past tense / gerund reduction with stem repair.
    fn step1b(&mut self) {
        if self.ends_with("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.buf.pop();
            }
            return;
        }
        let removed = if self.ends_with("ed") && self.has_vowel(self.stem_len("ed")) {
            self.replace("ed", "");
            true
        } else if self.ends_with("ing") && self.has_vowel(self.stem_len("ing")) {
            self.replace("ing", "");
            true
        } else {
            false
        };
        if !removed {
            return;
        }
        if self.ends_with("at") {
            self.replace("at", "ate");
        } else if self.ends_with("bl") {
            self.replace("bl", "ble");
        } else if self.ends_with("iz") {
            self.replace("iz", "ize");
        } else if self.ends_double_consonant(self.buf.len()) {
            if !matches!(self.buf[self.buf.len() - 1], b'l' | b's' | b'z') {
                self.buf.pop();
            }
        } else if self.measure(self.buf.len()) == 1 && self.ends_cvc(self.buf.len()) {
            self.buf.push(b'e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel(self.buf.len() - 1) {
            let last = self.buf.len() - 1;
            self.buf[last] = b'i';
        }
    }

    /// Applies the first matching rule whose stem measure exceeds `min_m`.
    /// A suffix that matches but fails the measure test still terminates the
    /// scan, mirroring the reference implementation.
    fn apply_rules(&mut self, rules: &[(&str, &str)], min_m: usize) {
        for &(suffix, with) in rules {
            if self.ends_with(suffix) {
                if self.measure(self.stem_len(suffix)) > min_m {
                    self.replace(suffix, with);
                }
                return;
            }
        }
    }

    fn step2(&mut self) {
        self.apply_rules(
            &[
                ("ational", "ate"),
                ("tional", "tion"),
                ("enci", "ence"),
                ("anci", "ance"),
                ("izer", "ize"),
                ("bli", "ble"),
                ("alli", "al"),
                ("entli", "ent"),
                ("eli", "e"),
                ("ousli", "ous"),
                ("ization", "ize"),
                ("ation", "ate"),
                ("ator", "ate"),
                ("alism", "al"),
                ("iveness", "ive"),
                ("fulness", "ful"),
                ("ousness", "ous"),
                ("aliti", "al"),
                ("iviti", "ive"),
                ("biliti", "ble"),
                ("logi", "log"),
            ],
            0,
        );
    }

    fn step3(&mut self) {
        self.apply_rules(
            &[
                ("icate", "ic"),
                ("ative", ""),
                ("alize", "al"),
                ("iciti", "ic"),
                ("ical", "ic"),
                ("ful", ""),
                ("ness", ""),
            ],
            0,
        );
    }

    fn step4(&mut self) {
        // "ion" only counts as a match when the stem ends in s or t.
        if self.ends_with("ion") {
            let at = self.stem_len("ion");
            if at > 0 && matches!(self.buf[at - 1], b's' | b't') {
                if self.measure(at) > 1 {
                    self.replace("ion", "");
                }
                return;
            }
        }
        self.apply_rules(
            &[
                ("al", ""),
                ("ance", ""),
                ("ence", ""),
                ("er", ""),
                ("ic", ""),
                ("able", ""),
                ("ible", ""),
                ("ant", ""),
                ("ement", ""),
                ("ment", ""),
                ("ent", ""),
                ("ou", ""),
                ("ism", ""),
                ("ate", ""),
                ("iti", ""),
                ("ous", ""),
                ("ive", ""),
                ("ize", ""),
            ],
            1,
        );
    }

    fn step5(&mut self) {
        if self.ends_with("e") {
            let m = self.measure(self.buf.len() - 1);
            if m > 1 || (m == 1 && !self.ends_cvc(self.buf.len() - 1)) {
                self.buf.pop();
            }
        }
        if self.ends_with("l")
            && self.ends_double_consonant(self.buf.len())
            && self.measure(self.buf.len()) > 1
        {
            self.buf.pop();
        }
    }
}
