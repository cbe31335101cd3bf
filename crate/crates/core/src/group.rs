//! Free products `Z^{*d1} * Z2^{*d2}` and their standard symmetric generating
//! sets. The Cayley graph of such a group is the `d`-regular tree with
//! `d = 2*d1 + d2`.
//!
//! Generators are small integer ids. The canonical order places the `2*d1`
//! free halves first, with each inverse pair adjacent (`a1, a1^-1, a2, ...`),
//! followed by the `d2` involutions (`b1, ..., b_d2`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A generator of the presentation, identified by its canonical index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Generator(pub u8);

impl Generator {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// One half of an inverse pair `a, a^-1` coming from a `Z` factor.
    FreeHalf { partner: Generator },
    /// A generator `b` with `b^2 = e` coming from a `Z2` factor.
    Involution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPresentation {
    d1: usize,
    d2: usize,
    inverse: Vec<u8>,
}

impl GroupPresentation {
    /// Builds the canonical presentation of `Z^{*d1} * Z2^{*d2}`.
    ///
    /// Any `d >= 2` is accepted here; analysis entry points apply the
    /// stricter `d >= 3` requirement themselves.
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        let d = 2 * d1 + d2;
        if d < 2 {
            return Err(Error::DegreeTooSmall { d, min: 2 });
        }
        if d > u8::MAX as usize {
            return Err(Error::DegreeTooLarge(d));
        }
        let mut inverse = Vec::with_capacity(d);
        for pair in 0..d1 {
            inverse.push((2 * pair + 1) as u8);
            inverse.push((2 * pair) as u8);
        }
        for j in 0..d2 {
            inverse.push((2 * d1 + j) as u8);
        }
        Ok(Self { d1, d2, inverse })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    /// Size of the generating set, i.e. the degree of the Cayley tree.
    #[inline]
    pub fn degree(&self) -> usize {
        self.inverse.len()
    }

    pub fn generators(&self) -> impl Iterator<Item = Generator> + '_ {
        (0..self.degree()).map(|i| Generator(i as u8))
    }

    pub fn contains(&self, g: Generator) -> bool {
        g.index() < self.degree()
    }

    pub fn kind(&self, g: Generator) -> GeneratorKind {
        let h = self.inverse(g);
        if h == g {
            GeneratorKind::Involution
        } else {
            GeneratorKind::FreeHalf { partner: h }
        }
    }

    /// The unique `h` in the generating set with `h * g = e`.
    #[inline]
    pub fn inverse(&self, g: Generator) -> Generator {
        Generator(self.inverse[g.index()])
    }

    /// Whether appending `g` to a reduced word ending in `top` shortens it.
    #[inline]
    pub fn cancels(&self, top: Generator, g: Generator) -> bool {
        self.inverse[top.index()] == g.0
    }

    /// Raw inverse table, indexed by generator id.
    #[inline]
    pub(crate) fn inverse_table(&self) -> &[u8] {
        &self.inverse
    }

    /// Human-readable label: `a1`, `a1^-1`, ..., `b1`, ...
    pub fn label(&self, g: Generator) -> String {
        let i = g.index();
        if i < 2 * self.d1 {
            if i % 2 == 0 {
                format!("a{}", i / 2 + 1)
            } else {
                format!("a{}^-1", i / 2 + 1)
            }
        } else {
            format!("b{}", i - 2 * self.d1 + 1)
        }
    }
}

impl fmt::Display for GroupPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut factors = Vec::new();
        match self.d1 {
            0 => {}
            1 => factors.push("Z".to_string()),
            k => factors.push(format!("Z^*{k}")),
        }
        match self.d2 {
            0 => {}
            1 => factors.push("Z2".to_string()),
            k => factors.push(format!("Z2^*{k}")),
        }
        write!(f, "{}", factors.join(" * "))
    }
}
