//! Word-level tokenizer over the synthetic-corpus vocabulary.
//!
//! The vocabulary is a fixed builtin list: specials, grammar glue words, the
//! color palette and the shape names. Captions are lowercased, split on
//! whitespace with punctuation stripped, framed with start/end markers, and
//! truncated to the context length keeping the end marker in place.

use std::collections::HashMap;

use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const START: u32 = 1;
pub const END: u32 = 2;

/// Named colors available to scene specs. Order is part of the vocabulary
/// contract; do not reorder.
pub const COLOR_TABLE: [(&str, [f64; 3]); 8] = [
    ("red", [0.90, 0.10, 0.10]),
    ("green", [0.10, 0.75, 0.15]),
    ("blue", [0.15, 0.20, 0.90]),
    ("yellow", [0.92, 0.88, 0.10]),
    ("cyan", [0.10, 0.85, 0.85]),
    ("magenta", [0.85, 0.10, 0.80]),
    ("orange", [0.95, 0.55, 0.08]),
    ("white", [0.95, 0.95, 0.95]),
];

pub const SHAPE_NAMES: [&str; 3] = ["circle", "square", "triangle"];

const GLUE_WORDS: [&str; 6] = ["a", "and", "photo", "of", "on", "background"];

#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// The fixed vocabulary covering the caption grammar and the prompt
    /// template.
    pub fn builtin() -> &'static Vocabulary {
        use std::sync::OnceLock;
        static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
        VOCAB.get_or_init(|| {
            let mut words: Vec<String> =
                vec!["<pad>".into(), "<start>".into(), "<end>".into()];
            words.extend(GLUE_WORDS.iter().map(|w| w.to_string()));
            words.extend(COLOR_TABLE.iter().map(|(name, _)| name.to_string()));
            words.extend(SHAPE_NAMES.iter().map(|w| w.to_string()));
            let index = words
                .iter()
                .enumerate()
                .map(|(i, w)| (w.clone(), i as u32))
                .collect();
            Vocabulary { words, index }
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Tokenize a caption: `<start> w1 .. wk <end>`, truncated to `context`
    /// tokens with the end marker always last.
    pub fn tokenize(&self, text: &str, context: usize) -> Result<Vec<u32>> {
        if context < 2 {
            return Err(Error::Input("context length must be >= 2".into()));
        }
        let mut ids = vec![START];
        for raw in text.split_whitespace() {
            let word: String = raw
                .chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_ascii_lowercase();
            if word.is_empty() {
                continue;
            }
            let id = self
                .id(&word)
                .ok_or_else(|| Error::Input(format!("word not in vocabulary: {word:?}")))?;
            ids.push(id);
        }
        if ids.len() > context - 1 {
            ids.truncate(context - 1);
        }
        ids.push(END);
        Ok(ids)
    }

    pub fn color_rgb(name: &str) -> Option<[f64; 3]> {
        COLOR_TABLE.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_basic_caption() {
        let v = Vocabulary::builtin();
        let ids = v.tokenize("a red circle", 16).unwrap();
        assert_eq!(ids[0], START);
        assert_eq!(*ids.last().unwrap(), END);
        assert_eq!(ids.len(), 5);
        assert_eq!(v.word(ids[2]), Some("red"));
    }

    #[test]
    fn tokenize_strips_punctuation_and_case() {
        let v = Vocabulary::builtin();
        let a = v.tokenize("Red circle, a RED circle", 16).unwrap();
        let b = v.tokenize("red circle a red circle", 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_word_is_an_input_error() {
        let v = Vocabulary::builtin();
        assert!(v.tokenize("a purple dodecahedron", 16).is_err());
    }

    #[test]
    fn truncation_keeps_end_marker() {
        let v = Vocabulary::builtin();
        let ids = v
            .tokenize("a red circle and a blue square and a green triangle and a yellow circle", 16)
            .unwrap();
        assert_eq!(ids.len(), 16);
        assert_eq!(*ids.last().unwrap(), END);
    }
}
