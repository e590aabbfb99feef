//! Whitespace word segmentation shared by the perturbation generators and the
//! premise pruner.

/// One whitespace-delimited chunk, split into leading punctuation, the
/// alphanumeric core, and trailing punctuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub lead: String,
    pub core: String,
    pub trail: String,
    pub sentence_initial: bool,
}

impl Word {
    pub fn text(&self) -> String {
        format!("{}{}{}", self.lead, self.core, self.trail)
    }

    pub fn char_len(&self) -> usize {
        self.core.chars().count()
    }

    pub fn is_numeric(&self) -> bool {
        self.core.chars().any(|c| c.is_ascii_digit())
    }

    /// Capitalized and not at the start of a sentence.
    pub fn is_proper_noun(&self) -> bool {
        !self.sentence_initial && self.core.chars().next().is_some_and(char::is_uppercase)
    }
}

/// A sentence split into words, keeping the exact separators so that
/// untouched text round-trips byte for byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Words {
    pub words: Vec<Word>,
    /// `seps[i]` precedes `words[i]`; the final entry trails the last word.
    seps: Vec<String>,
}

impl Words {
    pub fn parse(text: &str) -> Self {
        let mut words = Vec::new();
        let mut seps = Vec::new();
        let mut sep = String::new();
        let mut chunk = String::new();
        for ch in text.chars() {
            if ch.is_whitespace() {
                if !chunk.is_empty() {
                    seps.push(std::mem::take(&mut sep));
                    words.push(split_chunk(&std::mem::take(&mut chunk)));
                }
                sep.push(ch);
            } else {
                chunk.push(ch);
            }
        }
        if !chunk.is_empty() {
            seps.push(std::mem::take(&mut sep));
            words.push(split_chunk(&chunk));
        }
        seps.push(sep);

        let mut initial = true;
        for word in &mut words {
            word.sentence_initial = initial;
            let ends = word
                .trail
                .trim_end_matches(['\'', '"', ')', '\u{2019}', '\u{201d}'])
                .ends_with(['.', '!', '?']);
            // A bare punctuation chunk ("-") does not start a new sentence.
            initial = ends || (word.core.is_empty() && initial);
        }
        Words { words, seps }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Drops word `i` together with the separator in front of it.
    pub fn remove(&mut self, i: usize) {
        self.words.remove(i);
        // For the first word keep the sentence's leading whitespace instead.
        self.seps.remove(if i == 0 { 1 } else { i });
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (sep, word) in self.seps.iter().zip(&self.words) {
            out.push_str(sep);
            out.push_str(&word.text());
        }
        out.push_str(self.seps.last().map(String::as_str).unwrap_or(""));
        out
    }
}

fn split_chunk(chunk: &str) -> Word {
    let chars: Vec<char> = chunk.chars().collect();
    let start = chars.iter().position(|c| c.is_alphanumeric());
    let Some(start) = start else {
        return Word {
            lead: chunk.to_string(),
            core: String::new(),
            trail: String::new(),
            sentence_initial: false,
        };
    };
    let end = chars.iter().rposition(|c| c.is_alphanumeric()).unwrap() + 1;
    Word {
        lead: chars[..start].iter().collect(),
        core: chars[start..end].iter().collect(),
        trail: chars[end..].iter().collect(),
        sentence_initial: false,
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "been", "but", "by", "did", "do",
    "does", "for", "from", "had", "has", "have", "he", "her", "his", "in", "into", "is", "it",
    "its", "more", "not", "of", "on", "or", "she", "than", "that", "the", "their", "there",
    "they", "this", "to", "was", "were", "which", "who", "will", "with",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn round_trips_spacing() {
        let text = "  'Case Closed'  is a (long-term) comic.  ";
        assert_eq!(Words::parse(text).render(), text);
    }

    #[test]
    fn splits_affixes() {
        let words = Words::parse("Shogakukan UK published 'Case Closed' (Eng).");
        let last = words.words.last().unwrap();
        assert_eq!((last.lead.as_str(), last.core.as_str(), last.trail.as_str()), ("(", "Eng", ")."));
        assert!(words.words[0].sentence_initial);
        assert!(words.words[1].is_proper_noun());
        assert!(!words.words[2].is_proper_noun());
    }

    #[test]
    fn sentence_boundaries() {
        let words = Words::parse("It ended. Then Tokyo won.");
        assert!(words.words[2].sentence_initial);
        assert!(!words.words[2].is_proper_noun());
        assert!(words.words[3].is_proper_noun());
    }

    #[test]
    fn lowercase_tokens() {
        assert_eq!(tokens("The Region of WIMA, 1950!"), ["the", "region", "of", "wima", "1950"]);
    }
}
