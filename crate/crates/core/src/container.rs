//! Line-oriented structured text container shared by scene, chain, trace
//! and results files.
//!
//! A file starts with a magic line `#handover-<kind> v1`. Every following
//! non-blank line is a record: a key followed by space-separated fields.
//! Floats are written with Rust's shortest round-trip decimal formatting,
//! so a write/read cycle reproduces every value bit for bit.

use std::fmt::{Display, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pose::Pose;

pub const VERSION: &str = "v1";

pub fn magic(kind: &str) -> String {
    format!("#handover-{kind} {VERSION}")
}

/// One parsed record with the byte offset of each field.
#[derive(Debug, Clone)]
pub struct Record<'a> {
    pub offset: usize,
    pub key: &'a str,
    fields: Vec<(usize, &'a str)>,
}

impl<'a> Record<'a> {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.fields.len() != n {
            return Err(Error::format(
                self.offset,
                format!(
                    "record `{}` has {} fields, expected {n}",
                    self.key,
                    self.fields.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn str(&self, i: usize) -> Result<&'a str> {
        self.fields.get(i).map(|(_, s)| *s).ok_or_else(|| {
            Error::format(
                self.offset,
                format!("record `{}` is missing field {i}", self.key),
            )
        })
    }

    pub fn parse<T: FromStr>(&self, i: usize) -> Result<T> {
        let (off, s) = *self.fields.get(i).ok_or_else(|| {
            Error::format(
                self.offset,
                format!("record `{}` is missing field {i}", self.key),
            )
        })?;
        s.parse()
            .map_err(|_| Error::format(off, format!("cannot parse `{s}` in `{}`", self.key)))
    }

    pub fn f64(&self, i: usize) -> Result<f64> {
        let v: f64 = self.parse(i)?;
        if !v.is_finite() {
            return Err(Error::format(self.field_offset(i), "non-finite number"));
        }
        Ok(v)
    }

    pub fn field_offset(&self, i: usize) -> usize {
        self.fields.get(i).map_or(self.offset, |(o, _)| *o)
    }

    pub fn floats<const N: usize>(&self, start: usize) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.f64(start + k)?;
        }
        Ok(out)
    }

    pub fn pose(&self, start: usize) -> Result<Pose> {
        let v = self.floats::<7>(start)?;
        Pose::from_array(v).map_err(|e| Error::format(self.field_offset(start), e.to_string()))
    }
}

/// Sequential reader over a container's records.
pub struct Reader<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks the magic line for `kind` and positions after it.
    pub fn new(text: &'a str, kind: &str) -> Result<Self> {
        let expected = magic(kind);
        let first_end = text.find('\n').unwrap_or(text.len());
        let first = text[..first_end].trim_end_matches('\r');
        if first != expected {
            return Err(Error::format(
                0,
                format!("missing header `{expected}`"),
            ));
        }
        Ok(Self {
            text,
            pos: (first_end + 1).min(text.len()),
        })
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn next_record(&mut self) -> Option<Record<'a>> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let end = self.text[start..]
                .find('\n')
                .map_or(self.text.len(), |i| start + i);
            self.pos = (end + 1).min(self.text.len());
            let line = self.text[start..end].trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = Vec::new();
            let mut rest = line;
            let mut base = start;
            loop {
                let trimmed = rest.trim_start_matches(' ');
                base += rest.len() - trimmed.len();
                if trimmed.is_empty() {
                    break;
                }
                let tok_end = trimmed.find(' ').unwrap_or(trimmed.len());
                tokens.push((base, &trimmed[..tok_end]));
                base += tok_end;
                rest = &trimmed[tok_end..];
            }
            let (offset, key) = tokens[0];
            return Some(Record {
                offset,
                key,
                fields: tokens[1..].to_vec(),
            });
        }
        None
    }

    /// Next record, which must carry `key`.
    pub fn expect(&mut self, key: &str) -> Result<Record<'a>> {
        let at = self.pos;
        match self.next_record() {
            Some(r) if r.key == key => Ok(r),
            Some(r) => Err(Error::format(
                r.offset,
                format!("expected `{key}`, found `{}`", r.key),
            )),
            None => Err(Error::format(
                at,
                format!("unexpected end of file, expected `{key}`"),
            )),
        }
    }

    pub fn expect_end(&mut self) -> Result<()> {
        match self.next_record() {
            None => Ok(()),
            Some(r) => Err(Error::format(
                r.offset,
                format!("unexpected trailing record `{}`", r.key),
            )),
        }
    }
}

/// Builds a container text.
pub struct Writer {
    out: String,
}

impl Writer {
    pub fn new(kind: &str) -> Self {
        let mut out = magic(kind);
        out.push('\n');
        Self { out }
    }

    pub fn record(&mut self, key: &str) -> RecordWriter<'_> {
        self.out.push_str(key);
        RecordWriter { out: &mut self.out }
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub struct RecordWriter<'w> {
    out: &'w mut String,
}

impl RecordWriter<'_> {
    pub fn field(self, v: impl Display) -> Self {
        let _ = write!(self.out, " {v}");
        self
    }

    pub fn floats(mut self, vs: &[f64]) -> Self {
        for v in vs {
            self = self.field(v);
        }
        self
    }

    pub fn pose(self, p: &Pose) -> Self {
        self.floats(&p.to_array())
    }

    pub fn end(self) {
        self.out.push('\n');
    }
}
