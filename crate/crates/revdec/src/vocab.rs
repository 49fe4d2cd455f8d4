//! Token inventory shared by scoring sources and the decoder.

use thiserror::Error;

/// Dense token index into a [`Vocabulary`].
pub type TokenId = u32;

/// 1-based source frame index. Frame 0 is reserved for "before any input"
/// (the start token's emission slot and the commit slot of zero-frame streams).
pub type FrameIndex = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("vocabulary needs at least 2 tokens (blank and start), got {0}")]
    TooSmall(usize),
    #[error("duplicate token string {0:?}")]
    DuplicateToken(String),
    #[error("blank_id {blank_id} out of range for vocabulary of size {size}")]
    BlankOutOfRange { blank_id: TokenId, size: usize },
    #[error("bos_id {bos_id} out of range for vocabulary of size {size}")]
    BosOutOfRange { bos_id: TokenId, size: usize },
    #[error("blank_id and bos_id must differ, both are {0}")]
    BlankEqualsBos(TokenId),
}

/// Closed token inventory: display strings plus the two reserved roles.
///
/// `blank_id` is the non-emitting frame-advance symbol; `bos_id` seeds every
/// hypothesis and is stripped from displayed output. They always differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    blank_id: TokenId,
    bos_id: TokenId,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, blank_id: TokenId, bos_id: TokenId) -> Result<Self, VocabError> {
        let size = tokens.len();
        if size < 2 {
            return Err(VocabError::TooSmall(size));
        }
        if (blank_id as usize) >= size {
            return Err(VocabError::BlankOutOfRange { blank_id, size });
        }
        if (bos_id as usize) >= size {
            return Err(VocabError::BosOutOfRange { bos_id, size });
        }
        if blank_id == bos_id {
            return Err(VocabError::BlankEqualsBos(blank_id));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if !seen.insert(t.as_str()) {
                return Err(VocabError::DuplicateToken(t.clone()));
            }
        }
        Ok(Self { tokens, blank_id, bos_id })
    }

    /// Standard synthetic inventory: blank at 0, start token at 1, then
    /// word tokens `w2..w{n-1}`.
    pub fn synthetic(n: usize) -> Self {
        assert!(n >= 2, "synthetic vocabulary needs at least blank and start");
        let mut tokens = Vec::with_capacity(n);
        tokens.push("<blank>".to_owned());
        tokens.push("<s>".to_owned());
        for i in 2..n {
            tokens.push(format!("w{i}"));
        }
        Self { tokens, blank_id: 0, bos_id: 1 }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn blank_id(&self) -> TokenId {
        self.blank_id
    }

    pub fn bos_id(&self) -> TokenId {
        self.bos_id
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, s: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == s).map(|i| i as TokenId)
    }

    /// Maps token indices to their display strings. Panics on out-of-range
    /// indices, which cannot occur for sequences produced against this
    /// vocabulary.
    pub fn strings_for(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .unwrap_or_else(|| panic!("token id {id} out of range for vocabulary of size {}", self.size()))
                    .to_owned()
            })
            .collect()
    }

    /// Order-sensitive 64-bit digest of the full inventory, used to label
    /// trace files so mismatched vocabularies are detectable.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the token strings with separators, then the role ids.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for t in &self.tokens {
            for b in t.as_bytes() {
                eat(*b);
            }
            eat(0xff);
        }
        for b in self.blank_id.to_le_bytes() {
            eat(b);
        }
        for b in self.bos_id.to_le_bytes() {
            eat(b);
        }
        h
    }
}

/// Length of the longest shared prefix of two token sequences.
pub fn longest_common_prefix(a: &[TokenId], b: &[TokenId]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}
