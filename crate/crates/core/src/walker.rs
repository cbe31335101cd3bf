//! Position of the walker as a reduced word on the Cayley tree.

use crate::group::{Generator, GroupPresentation};

/// The reduced word `w_n` kept as a stack of generator ids (root side at the
/// bottom), together with the step counter `n`. The distance to the root is
/// the stack height.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkerState {
    word: Vec<u8>,
    n: u64,
}

impl WalkerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Preallocates the word for a run of `horizon` steps so the stack never
    /// reallocates inside the kernel.
    pub fn with_horizon(horizon: usize) -> Self {
        Self {
            word: Vec::with_capacity(horizon),
            n: 0,
        }
    }

    /// Applies `g` and returns the distance increment, `+1` or `-1`.
    #[inline]
    pub fn apply_step(&mut self, pres: &GroupPresentation, g: Generator) -> i32 {
        self.apply_raw(pres.inverse_table(), g.0)
    }

    #[inline(always)]
    pub(crate) fn apply_raw(&mut self, inverse: &[u8], g: u8) -> i32 {
        self.n += 1;
        match self.word.last() {
            Some(&top) if inverse[top as usize] == g => {
                self.word.pop();
                -1
            }
            _ => {
                self.word.push(g);
                1
            }
        }
    }

    /// `gamma_n`: the unique generator that moves one step towards the root,
    /// or `None` at the root.
    #[inline]
    pub fn toward_root(&self, pres: &GroupPresentation) -> Option<Generator> {
        self.word.last().map(|&top| pres.inverse(Generator(top)))
    }

    #[inline]
    pub fn distance(&self) -> usize {
        self.word.len()
    }

    #[inline]
    pub fn steps(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn at_root(&self) -> bool {
        self.word.is_empty()
    }

    #[inline]
    pub(crate) fn top(&self) -> Option<u8> {
        self.word.last().copied()
    }

    pub fn word(&self) -> impl Iterator<Item = Generator> + '_ {
        self.word.iter().map(|&g| Generator(g))
    }

    /// Undo the most recent step, given the generator that was applied and
    /// the increment it produced. Used by the exhaustive enumerator.
    #[inline]
    pub(crate) fn undo(&mut self, g: u8, inverse: &[u8], increment: i32) {
        self.n -= 1;
        if increment > 0 {
            self.word.pop();
        } else {
            self.word.push(inverse[g as usize]);
        }
    }
}
