use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square grid of code indices, stored row-major. The unit record of an archive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenGrid {
    side: usize,
    tokens: Vec<u16>,
}

impl TokenGrid {
    pub fn new(side: usize, tokens: Vec<u16>) -> Result<Self> {
        if side == 0 {
            return Err(Error::input("grid side must be at least 1"));
        }
        if tokens.len() != side * side {
            return Err(Error::input(format!(
                "grid of side {side} needs {} tokens, got {}",
                side * side,
                tokens.len()
            )));
        }
        Ok(Self { side, tokens })
    }

    pub fn filled(side: usize, value: u16) -> Self {
        assert!(side > 0, "grid side must be at least 1");
        Self {
            side,
            tokens: vec![value; side * side],
        }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn tokens(&self) -> &[u16] {
        &self.tokens
    }

    #[inline]
    pub fn tokens_mut(&mut self) -> &mut [u16] {
        &mut self.tokens
    }

    pub fn into_tokens(self) -> Vec<u16> {
        self.tokens
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.tokens[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u16) {
        self.tokens[row * self.side + col] = value;
    }

    /// Largest token value, or `None` for an empty grid (never constructed).
    pub fn max_token(&self) -> Option<u16> {
        self.tokens.iter().copied().max()
    }

    /// Checks every index is below `vocab`.
    pub fn check_vocab(&self, vocab: usize) -> Result<()> {
        match self.tokens.iter().position(|&t| usize::from(t) >= vocab) {
            Some(pos) => Err(Error::input(format!(
                "token {} at position {pos} is outside the vocabulary of {vocab}",
                self.tokens[pos]
            ))),
            None => Ok(()),
        }
    }

    pub fn map(&self, mut f: impl FnMut(u16) -> u16) -> Self {
        Self {
            side: self.side,
            tokens: self.tokens.iter().map(|&t| f(t)).collect(),
        }
    }
}
