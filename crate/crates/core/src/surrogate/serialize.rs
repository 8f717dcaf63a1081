//! Line-oriented text encoding of a surrogate:
//!
//! ```text
//! pdd-surrogate 1
//! dims <N> <S> <m>
//! method <lasso|sdmorph>
//! penalty_fraction <f>
//! marginal <i> uniform <lower> <upper>
//! marginal <i> truncated-normal <mean> <sd> <lower> <upper>
//! alpha <i> <m values>
//! beta <i> <m-1 values>
//! norms <i> <m+1 values>
//! terms <L>
//! term <k> <var:degree ...>          (the constant term is written as "-")
//! r <N values>
//! c <L values>
//! training <M>                       (optional block)
//! sample <z_1 .. z_N> <h>
//! end
//! ```
//!
//! Reals use Rust's shortest round-trip exponent form, so a write/read cycle
//! is bit-exact. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{PddBasis, PddSurrogate, TrainingSet, TransformVector};
use crate::error::{Error, Result};
use crate::measures::Marginal;
use crate::orthopoly::OrthoBasis1D;
use crate::pdd::{IndexEntry, MultiIndexSet};
use crate::regression::Method;

const MAGIC: &str = "pdd-surrogate";
const VERSION: &str = "1";

fn push_reals(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, " {v:e}");
    }
}

impl PddSurrogate {
    /// Encodes the surrogate, optionally with the training samples needed for
    /// single-pass retraining.
    pub fn to_text(&self, training: Option<&TrainingSet>) -> String {
        let basis = &self.basis;
        let idx = basis.index_set();
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "dims {} {} {}", idx.n(), idx.s(), idx.m());
        let _ = writeln!(out, "method {}", self.method.as_str());
        let _ = writeln!(out, "penalty_fraction {:e}", self.penalty_fraction);
        for (i, b) in basis.bases().iter().enumerate() {
            match *b.measure() {
                Marginal::Uniform { lower, upper } => {
                    let _ = write!(out, "marginal {i} uniform");
                    push_reals(&mut out, [lower, upper]);
                }
                Marginal::TruncatedNormal { mean, sd, lower, upper } => {
                    let _ = write!(out, "marginal {i} truncated-normal");
                    push_reals(&mut out, [mean, sd, lower, upper]);
                }
            }
            out.push('\n');
            for (name, vals) in [("alpha", b.alpha()), ("beta", b.beta()), ("norms", b.norms())] {
                let _ = write!(out, "{name} {i}");
                push_reals(&mut out, vals.iter().copied());
                out.push('\n');
            }
        }
        let _ = writeln!(out, "terms {}", idx.len());
        for (k, e) in idx.entries().iter().enumerate() {
            let _ = write!(out, "term {k}");
            if e.is_constant() {
                out.push_str(" -");
            }
            for (v, d) in e.vars.iter().zip(&e.degrees) {
                let _ = write!(out, " {v}:{d}");
            }
            out.push('\n');
        }
        out.push('r');
        push_reals(&mut out, self.r.as_slice().iter().copied());
        out.push_str("\nc");
        push_reals(&mut out, self.c.iter().copied());
        out.push('\n');
        if let Some(t) = training {
            let _ = writeln!(out, "training {}", t.len());
            for l in 0..t.len() {
                out.push_str("sample");
                push_reals(&mut out, t.z().row(l).iter().copied().chain([t.h()[l]]));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    /// Decodes [`PddSurrogate::to_text`] output.
    pub fn from_text(text: &str) -> Result<(Self, Option<TrainingSet>)> {
        Parser::new(text).parse()
    }

    pub fn save(&self, path: impl AsRef<Path>, training: Option<&TrainingSet>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text(training)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<TrainingSet>)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}

struct Parser<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty() && !t[0].starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn err(line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Next line, which must start with `key`; returns its line number and
    /// the remaining tokens.
    fn expect(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let last = self.lines.last().map_or(0, |l| l.0);
        let (line, toks) = self
            .lines
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Self::err(last + 1, format!("unexpected end of input, expected '{key}'")))?;
        if toks[0] != key {
            return Err(Self::err(line, format!("expected '{key}', found '{}'", toks[0])));
        }
        self.pos += 1;
        Ok((line, toks[1..].to_vec()))
    }

    fn peek_is(&self, key: &str) -> bool {
        self.lines.get(self.pos).is_some_and(|(_, t)| t[0] == key)
    }

    fn int(line: usize, tok: &str) -> Result<usize> {
        tok.parse()
            .map_err(|_| Self::err(line, format!("invalid integer '{tok}'")))
    }

    fn real(line: usize, tok: &str) -> Result<f64> {
        let v: f64 = tok
            .parse()
            .map_err(|_| Self::err(line, format!("invalid number '{tok}'")))?;
        if !v.is_finite() {
            return Err(Self::err(line, format!("non-finite number '{tok}'")));
        }
        Ok(v)
    }

    fn reals(line: usize, toks: &[&str], count: usize) -> Result<Vec<f64>> {
        if toks.len() != count {
            return Err(Self::err(
                line,
                format!("expected {count} values, found {}", toks.len()),
            ));
        }
        toks.iter().map(|t| Self::real(line, t)).collect()
    }

    /// `<key> <i> values...` with the index checked.
    fn indexed(&mut self, key: &str, i: usize, count: usize) -> Result<Vec<f64>> {
        let (line, toks) = self.expect(key)?;
        if toks.is_empty() || Self::int(line, toks[0])? != i {
            return Err(Self::err(line, format!("expected '{key} {i}'")));
        }
        Self::reals(line, &toks[1..], count)
    }

    fn parse(mut self) -> Result<(PddSurrogate, Option<TrainingSet>)> {
        let (line, toks) = self.expect(MAGIC)?;
        if toks != [VERSION] {
            return Err(Self::err(line, format!("unsupported format version {toks:?}")));
        }
        let (line, toks) = self.expect("dims")?;
        if toks.len() != 3 {
            return Err(Self::err(line, "dims needs N S m"));
        }
        let (n, s, m) = (
            Self::int(line, toks[0])?,
            Self::int(line, toks[1])?,
            Self::int(line, toks[2])?,
        );
        let (line, toks) = self.expect("method")?;
        let method = match toks.as_slice() {
            [name] => Method::parse(name).map_err(|e| Self::err(line, e.to_string()))?,
            _ => return Err(Self::err(line, "method needs one value")),
        };
        let (line, toks) = self.expect("penalty_fraction")?;
        let penalty_fraction = Self::reals(line, &toks, 1)?[0];

        let mut bases = Vec::with_capacity(n);
        for i in 0..n {
            let (line, toks) = self.expect("marginal")?;
            if toks.len() < 2 || Self::int(line, toks[0])? != i {
                return Err(Self::err(line, format!("expected 'marginal {i} <kind> ...'")));
            }
            let measure = match toks[1] {
                "uniform" => {
                    let v = Self::reals(line, &toks[2..], 2)?;
                    Marginal::Uniform {
                        lower: v[0],
                        upper: v[1],
                    }
                }
                "truncated-normal" => {
                    let v = Self::reals(line, &toks[2..], 4)?;
                    Marginal::TruncatedNormal {
                        mean: v[0],
                        sd: v[1],
                        lower: v[2],
                        upper: v[3],
                    }
                }
                other => return Err(Self::err(line, format!("unknown marginal kind '{other}'"))),
            };
            let alpha = self.indexed("alpha", i, m)?;
            let beta = self.indexed("beta", i, m.saturating_sub(1))?;
            let (line, _) = self.lines[self.pos].clone();
            let norms = self.indexed("norms", i, m + 1)?;
            let b =
                OrthoBasis1D::from_parts(measure, alpha, beta, norms).map_err(|e| Self::err(line, e.to_string()))?;
            bases.push(b);
        }

        let (line, toks) = self.expect("terms")?;
        let l = match toks.as_slice() {
            [t] => Self::int(line, t)?,
            _ => return Err(Self::err(line, "terms needs one count")),
        };
        let mut entries = Vec::with_capacity(l);
        for k in 0..l {
            let (line, toks) = self.expect("term")?;
            if toks.is_empty() || Self::int(line, toks[0])? != k {
                return Err(Self::err(line, format!("expected 'term {k}'")));
            }
            let mut e = IndexEntry::constant();
            if toks[1..] != ["-"] {
                for t in &toks[1..] {
                    let (v, d) = t
                        .split_once(':')
                        .ok_or_else(|| Self::err(line, format!("term factor '{t}' is not var:degree")))?;
                    e.vars.push(Self::int(line, v)?);
                    e.degrees.push(Self::int(line, d)?);
                }
            }
            entries.push(e);
        }
        let idx = MultiIndexSet::from_entries(n, s, m, entries).map_err(|e| Self::err(line, e.to_string()))?;
        let basis = PddBasis::from_parts(bases, idx).map_err(|e| Self::err(line, e.to_string()))?;

        let (line, toks) = self.expect("r")?;
        let r = TransformVector::new(Self::reals(line, &toks, n)?).map_err(|e| Self::err(line, e.to_string()))?;
        let (line, toks) = self.expect("c")?;
        let c = DVector::from_vec(Self::reals(line, &toks, l)?);
        let surrogate = PddSurrogate::new(Arc::new(basis), c, r.clone(), method, penalty_fraction)
            .map_err(|e| Self::err(line, e.to_string()))?;

        let training = if self.peek_is("training") {
            let (line, toks) = self.expect("training")?;
            let count = match toks.as_slice() {
                [t] => Self::int(line, t)?,
                _ => return Err(Self::err(line, "training needs one count")),
            };
            let mut z = DMatrix::zeros(count, n);
            let mut h = DVector::zeros(count);
            for row in 0..count {
                let (line, toks) = self.expect("sample")?;
                let v = Self::reals(line, &toks, n + 1)?;
                for i in 0..n {
                    z[(row, i)] = v[i];
                }
                h[row] = v[n];
            }
            Some(TrainingSet::new(z, h, r).map_err(|e| Self::err(line, e.to_string()))?)
        } else {
            None
        };
        self.expect("end")?;
        if let Some((line, _)) = self.lines.get(self.pos) {
            return Err(Self::err(*line, "content after 'end'"));
        }
        Ok((surrogate, training))
    }
}
