//! The generating set of 2V as concrete elements, generator families, and
//! word evaluation.
//!
//! Generators live in a versioned data file (overridable with the
//! `NV_GENERATORS` environment variable), one pair-list record per symbol.
//! Symbols follow the ASCII scheme `x0, x1, x2, y0, y1, B0, B1, C0, C1,
//! Bh_0, gamma_0, xh_1, xh_2, yh_1, hx_1, hx_2, hxh_1, hxh_2, pi_0, pi_1,
//! pib_0, pib_1, alpha_0, alpha_1, beta_0, beta_1`. Higher family members
//! (`A_i`, `B_i`, `C_i`, `pi_i`, `pib_i`) are conjugates by powers of `x0`
//! and resolve dynamically.

use crate::element::Element;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt;

/// Symbols that must be present for the divergence pipeline to run.
pub const REQUIRED_SYMBOLS: [&str; 26] = [
    "x0", "x1", "x2", "y0", "y1", "B0", "B1", "C0", "C1", "Bh_0", "gamma_0", "xh_1", "xh_2",
    "yh_1", "hx_1", "hx_2", "hxh_1", "hxh_2", "pi_0", "pi_1", "pib_0", "pib_1", "alpha_0",
    "alpha_1", "beta_0", "beta_1",
];

#[derive(Debug, thiserror::Error)]
pub enum GensetError {
    #[error("generator file parse error: {0}")]
    ParseError(String),
    #[error("invalid generator element: {0}")]
    InvalidElement(String),
    #[error("duplicate symbol: {0}")]
    DuplicateSymbol(String),
    #[error("unknown symbol: {0}")]
    UnknownSymbol(String),
    #[error("family index out of range: {0}")]
    IndexOutOfRange(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Provenance {
    /// Fixed by a formula in the defining text.
    Textual,
    /// Transcribed from the defining figures.
    Figure,
}

#[derive(Clone, Debug)]
pub struct GeneratorDef {
    pub symbol: String,
    pub element: Element,
    pub provenance: Provenance,
}

/// Immutable table of loaded generators.
pub struct GeneratorTable {
    defs: HashMap<String, GeneratorDef>,
    order: Vec<String>,
    pub dimension: u32,
    /// Hex SHA-256 of the definition text.
    pub source_hash: String,
    warnings: Vec<String>,
}

impl GeneratorTable {
    #[must_use]
    pub fn get(&self, symbol: &str) -> Option<&GeneratorDef> {
        self.defs.get(symbol)
    }

    /// Symbols in file order.
    #[must_use]
    pub fn symbols(&self) -> &[String] {
        &self.order
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Required symbols not present in the table.
    #[must_use]
    pub fn missing(&self) -> Vec<&'static str> {
        REQUIRED_SYMBOLS
            .iter()
            .copied()
            .filter(|s| !self.defs.contains_key(*s))
            .collect()
    }

    #[must_use]
    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// Non-fatal issues found at load time (e.g. missing required symbols).
    #[must_use]
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Resolve a symbol to its element. Family symbols `A<i>`, `B<i>`,
    /// `C<i>` (i >= 2), `pi_<i>`, `pib_<i>` (i >= 2) are built as
    /// conjugates; `A0`/`A1` alias `x0`/`x1`.
    pub fn resolve(&self, symbol: &str) -> Result<Element, GensetError> {
        if let Some(def) = self.defs.get(symbol) {
            return Ok(def.element.clone());
        }
        match symbol {
            "A0" => return self.resolve("x0"),
            "A1" => return self.resolve("x1"),
            _ => {}
        }
        if let Some(rest) = symbol.strip_prefix("pi_").or_else(|| symbol.strip_prefix("pib_")) {
            if let Ok(i) = rest.parse::<u32>() {
                if i < 2 {
                    // pi_0, pi_1, pib_0, pib_1 come from the table; reaching
                    // here means the table lacks them.
                    return Err(GensetError::UnknownSymbol(symbol.into()));
                }
                let base = if symbol.starts_with("pib_") { "pib_1" } else { "pi_1" };
                return self.conjugate_up(base, i);
            }
        }
        if let Some(base) = symbol.strip_prefix(['A', 'B', 'C']) {
            if let Ok(i) = base.parse::<u32>() {
                let fam = match symbol.as_bytes()[0] {
                    b'A' => FamilyBase::A,
                    b'B' => FamilyBase::B,
                    _ => FamilyBase::C,
                };
                if i >= 1 {
                    return family(fam, i, self);
                }
            }
        }
        Err(GensetError::UnknownSymbol(symbol.into()))
    }

    /// x0^-(i-1) base x0^(i-1).
    fn conjugate_up(&self, base: &str, i: u32) -> Result<Element, GensetError> {
        let b = self.resolve(base)?;
        let x0 = self.resolve("x0")?;
        let p = x0.pow(i64::from(i) - 1);
        Ok(p.inverse().compose(&b).compose(&p).reduce_pair())
    }
}

/// Generator family bases with conjugation laws indexed from 1.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FamilyBase {
    A,
    B,
    C,
}

/// The family member: `A_1`/`B_1`/`C_1` conjugated down by `x0^(i-1)`.
pub fn family(base: FamilyBase, i: u32, table: &GeneratorTable) -> Result<Element, GensetError> {
    if i == 0 {
        return Err(GensetError::IndexOutOfRange(format!("{base:?} family starts at 1")));
    }
    let sym = match base {
        FamilyBase::A => "x1",
        FamilyBase::B => "B1",
        FamilyBase::C => "C1",
    };
    table.conjugate_up(sym, i)
}

/// Parse the generator definition text.
pub fn load_generators(text: &str) -> Result<GeneratorTable, GensetError> {
    let mut defs: HashMap<String, GeneratorDef> = HashMap::new();
    let mut order = Vec::new();
    let mut dimension = 2u32;
    let mut current: Option<(String, Provenance, Vec<&str>)> = None;
    let mut records: Vec<(String, Provenance, Vec<&str>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(dim) = line.strip_prefix("dimension=") {
            dimension = dim
                .trim()
                .parse()
                .map_err(|_| GensetError::ParseError(format!("line {}: bad dimension", lineno + 1)))?;
            continue;
        }
        if let Some(head) = line.strip_prefix('[') {
            let head = head.strip_suffix(']').ok_or_else(|| {
                GensetError::ParseError(format!("line {}: unclosed record header", lineno + 1))
            })?;
            let mut parts = head.split_whitespace();
            let symbol = parts
                .next()
                .ok_or_else(|| GensetError::ParseError(format!("line {}: empty header", lineno + 1)))?
                .to_string();
            let provenance = match parts.next() {
                Some("textual") => Provenance::Textual,
                Some("figure") | None => Provenance::Figure,
                Some(other) => {
                    return Err(GensetError::ParseError(format!(
                        "line {}: unknown provenance {other}",
                        lineno + 1
                    )))
                }
            };
            if let Some(rec) = current.take() {
                records.push(rec);
            }
            current = Some((symbol, provenance, Vec::new()));
            continue;
        }
        match &mut current {
            Some((_, _, body)) => body.push(raw),
            None => {
                return Err(GensetError::ParseError(format!(
                    "line {}: content before first record",
                    lineno + 1
                )))
            }
        }
    }
    if let Some(rec) = current.take() {
        records.push(rec);
    }
    for (symbol, provenance, body) in records {
        let element = Element::parse(&body.join("\n"))
            .map_err(|e| GensetError::ParseError(format!("{symbol}: {e}")))?;
        if element.is_identity() {
            return Err(GensetError::InvalidElement(format!("{symbol} is the identity")));
        }
        if defs.contains_key(&symbol) {
            return Err(GensetError::DuplicateSymbol(symbol));
        }
        order.push(symbol.clone());
        defs.insert(symbol.clone(), GeneratorDef { symbol, element, provenance });
    }
    let mut warnings = Vec::new();
    let missing: Vec<&str> = REQUIRED_SYMBOLS
        .iter()
        .copied()
        .filter(|s| !defs.contains_key(*s))
        .collect();
    if !missing.is_empty() {
        warnings.push(format!(
            "missing required symbols: {} (divergence construction will refuse to run)",
            missing.join(", ")
        ));
    }
    let source_hash = hex(&Sha256::digest(text.as_bytes()));
    Ok(GeneratorTable { defs, order, dimension, source_hash, warnings })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The definition text baked into the crate.
pub const DEFAULT_GENERATORS: &str = include_str!("../data/generators.txt");

/// Load the built-in table, or the file named by `NV_GENERATORS` if set.
pub fn load_default() -> Result<GeneratorTable, GensetError> {
    match std::env::var_os("NV_GENERATORS") {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                GensetError::ParseError(format!("cannot read {}: {e}", path.to_string_lossy()))
            })?;
            load_generators(&text)
        }
        None => load_generators(DEFAULT_GENERATORS),
    }
}

/// A word over generator symbols: a sequence of letters with exponent +-1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupWord {
    letters: Vec<(String, i8)>,
}

impl GroupWord {
    #[must_use]
    pub fn empty() -> Self {
        GroupWord { letters: Vec::new() }
    }

    /// Word length: the number of letters.
    #[must_use]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    #[must_use]
    pub fn letters(&self) -> &[(String, i8)] {
        &self.letters
    }

    /// Append `sym^k` (|k| letters; k may be zero or negative).
    pub fn push_power(&mut self, sym: &str, k: i64) {
        let sign: i8 = if k < 0 { -1 } else { 1 };
        for _ in 0..k.unsigned_abs() {
            self.letters.push((sym.to_string(), sign));
        }
    }

    pub fn push(&mut self, sym: &str, sign: i8) {
        assert!(sign == 1 || sign == -1);
        self.letters.push((sym.to_string(), sign));
    }

    pub fn extend(&mut self, other: &GroupWord) {
        self.letters.extend(other.letters.iter().cloned());
    }

    #[must_use]
    pub fn concat(&self, other: &GroupWord) -> GroupWord {
        let mut w = self.clone();
        w.extend(other);
        w
    }

    /// The formal inverse: letters reversed with exponents negated.
    #[must_use]
    pub fn inverse(&self) -> GroupWord {
        GroupWord {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|(s, e)| (s.clone(), -e))
                .collect(),
        }
    }

    /// Prefix of the first `k` letters.
    #[must_use]
    pub fn prefix(&self, k: usize) -> GroupWord {
        GroupWord { letters: self.letters[..k.min(self.letters.len())].to_vec() }
    }

    /// Parse whitespace-separated tokens `sym`, `sym^k`, `sym^-k`.
    pub fn parse(s: &str) -> Result<GroupWord, GensetError> {
        let mut w = GroupWord::empty();
        for tok in s.split_whitespace() {
            let (sym, exp) = match tok.split_once('^') {
                None => (tok, 1i64),
                Some((sym, e)) => {
                    let e: i64 = e.parse().map_err(|_| {
                        GensetError::ParseError(format!("bad exponent in token {tok}"))
                    })?;
                    (sym, e)
                }
            };
            if sym.is_empty()
                || !sym.chars().next().unwrap().is_ascii_alphabetic()
                || !sym.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(GensetError::ParseError(format!("bad symbol in token {tok}")));
            }
            w.push_power(sym, exp);
        }
        Ok(w)
    }
}

impl fmt::Display for GroupWord {
    /// Runs of equal letters print as `sym^k`; length is unchanged.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.letters.len() {
            let (sym, sign) = &self.letters[i];
            let mut j = i + 1;
            while j < self.letters.len() && self.letters[j] == self.letters[i] {
                j += 1;
            }
            let k = (j - i) as i64 * i64::from(*sign);
            if !first {
                write!(f, " ")?;
            }
            first = false;
            if k == 1 {
                write!(f, "{sym}")?;
            } else {
                write!(f, "{sym}^{k}")?;
            }
            i = j;
        }
        Ok(())
    }
}

/// Evaluate a word left to right (the first letter acts first).
pub fn word_to_element(w: &GroupWord, table: &GeneratorTable) -> Result<Element, GensetError> {
    let mut cache: HashMap<&str, Element> = HashMap::new();
    let mut acc = Element::identity();
    for (i, (sym, sign)) in w.letters().iter().enumerate() {
        if !cache.contains_key(sym.as_str()) {
            let el = table.resolve(sym)?;
            cache.insert(sym.as_str(), el);
        }
        let g = &cache[sym.as_str()];
        acc = if *sign >= 0 { acc.compose(g) } else { acc.compose(&g.inverse()) };
        if i % 32 == 31 {
            acc = acc.reduce_pair();
        }
    }
    Ok(acc.reduce_pair())
}
