use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance of a dictionary. Used for descriptors and for the structured
/// matrix-vector fast paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureTag {
    Dense { rows: usize, cols: usize },
    Dct2d { side: usize },
    Dirac { n: usize },
    KroneckerTime { frames: usize, inner: Box<StructureTag> },
    Concat(Box<StructureTag>, Box<StructureTag>),
}

impl StructureTag {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            StructureTag::Dense { rows, cols } => (*rows, *cols),
            StructureTag::Dct2d { side } => (side * side, side * side),
            StructureTag::Dirac { n } => (*n, *n),
            StructureTag::KroneckerTime { frames, inner } => {
                let (r, c) = inner.shape();
                (frames * r, frames * c)
            }
            StructureTag::Concat(a, b) => {
                let (ra, ca) = a.shape();
                let (_, cb) = b.shape();
                (ra, ca + cb)
            }
        }
    }
}

impl fmt::Display for StructureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureTag::Dense { rows, cols } => write!(f, "dense({rows},{cols})"),
            StructureTag::Dct2d { side } => write!(f, "dct2d({side})"),
            StructureTag::Dirac { n } => write!(f, "dirac({n})"),
            StructureTag::KroneckerTime { frames, inner } => {
                write!(f, "kronecker_time({frames},{inner})")
            }
            StructureTag::Concat(a, b) => write!(f, "concat({a},{b})"),
        }
    }
}

impl FromStr for StructureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parser = Parser { src: s.as_bytes(), pos: 0 };
        let tag = parser.tag()?;
        if parser.pos != parser.src.len() {
            return Err(parser.err("trailing characters"));
        }
        Ok(tag)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        Error::format(
            "structure descriptor",
            format!("{what} at byte {}", self.pos),
        )
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_lowercase() || self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn number(&mut self) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected number"))
    }

    fn tag(&mut self) -> Result<StructureTag> {
        let name = self.ident().to_owned();
        self.expect(b'(')?;
        let tag = match name.as_str() {
            "dense" => {
                let rows = self.number()?;
                self.expect(b',')?;
                let cols = self.number()?;
                StructureTag::Dense { rows, cols }
            }
            "dct2d" => StructureTag::Dct2d { side: self.number()? },
            "dirac" => StructureTag::Dirac { n: self.number()? },
            "kronecker_time" => {
                let frames = self.number()?;
                self.expect(b',')?;
                let inner = Box::new(self.tag()?);
                StructureTag::KroneckerTime { frames, inner }
            }
            "concat" => {
                let a = Box::new(self.tag()?);
                self.expect(b',')?;
                let b = Box::new(self.tag()?);
                StructureTag::Concat(a, b)
            }
            _ => return Err(self.err(&format!("unknown structure '{name}'"))),
        };
        self.expect(b')')?;
        Ok(tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_round_trip() {
        let tag = StructureTag::Concat(
            Box::new(StructureTag::KroneckerTime {
                frames: 4,
                inner: Box::new(StructureTag::Dct2d { side: 16 }),
            }),
            Box::new(StructureTag::KroneckerTime {
                frames: 4,
                inner: Box::new(StructureTag::Dirac { n: 256 }),
            }),
        );
        let s = tag.to_string();
        assert_eq!(s, "concat(kronecker_time(4,dct2d(16)),kronecker_time(4,dirac(256)))");
        assert_eq!(s.parse::<StructureTag>().unwrap(), tag);
        assert_eq!(tag.shape(), (1024, 2048));
    }

    #[test]
    fn bad_descriptors() {
        assert!("dct2d(".parse::<StructureTag>().is_err());
        assert!("blob(3)".parse::<StructureTag>().is_err());
        assert!("dirac(3)x".parse::<StructureTag>().is_err());
    }
}
