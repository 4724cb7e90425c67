//! Word → subword expansion with alignment maps.

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubwordMode {
    /// One subword per word.
    Identity,
    /// Split each word into consecutive chunks of at most `k` characters.
    FixedChunk(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub subwords: Vec<String>,
    pub word_of_subword: Vec<usize>,
    pub first_subword_of_word: Vec<usize>,
}

impl TokenizedSentence {
    pub fn num_subwords(&self) -> usize {
        self.subwords.len()
    }

    pub fn num_words(&self) -> usize {
        self.first_subword_of_word.len()
    }

    pub fn is_first_subword(&self, index: usize) -> bool {
        self.first_subword_of_word[self.word_of_subword[index]] == index
    }
}

pub fn subword_tokenize(s: &Sentence, mode: SubwordMode) -> Result<TokenizedSentence> {
    tokenize_words(&s.tokens, mode)
}

pub fn tokenize_words(words: &[String], mode: SubwordMode) -> Result<TokenizedSentence> {
    let mut out = TokenizedSentence {
        subwords: Vec::with_capacity(words.len()),
        word_of_subword: Vec::with_capacity(words.len()),
        first_subword_of_word: Vec::with_capacity(words.len()),
    };
    for (w, word) in words.iter().enumerate() {
        out.first_subword_of_word.push(out.subwords.len());
        match mode {
            SubwordMode::Identity => {
                out.subwords.push(word.clone());
                out.word_of_subword.push(w);
            }
            SubwordMode::FixedChunk(0) => {
                return Err(Error::InvalidArgument("chunk size must be at least 1".into()))
            }
            SubwordMode::FixedChunk(k) => {
                let chars: Vec<char> = word.chars().collect();
                // An empty word still owns one (empty) subword.
                if chars.is_empty() {
                    out.subwords.push(String::new());
                    out.word_of_subword.push(w);
                }
                for chunk in chars.chunks(k) {
                    out.subwords.push(chunk.iter().collect());
                    out.word_of_subword.push(w);
                }
            }
        }
    }
    Ok(out)
}
