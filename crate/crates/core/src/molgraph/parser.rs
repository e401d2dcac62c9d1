use std::collections::BTreeMap;

use thiserror::Error;

use super::element::Element;
use super::graph::{Atom, Bond, BondOrder, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty SMILES string")]
    Empty,
    #[error("non-ASCII byte at position {pos}")]
    NonAscii { pos: usize },
    #[error("ring bond {ring} opened at position {pos} is never closed")]
    UnclosedRing { ring: u32, pos: usize },
    #[error("unbalanced parenthesis at position {pos}")]
    UnbalancedParen { pos: usize },
    #[error("unknown atom symbol '{symbol}' at position {pos}")]
    UnknownAtomSymbol { symbol: String, pos: usize },
    #[error("atom {atom} ({element}) has bond-order sum {found}, above the maximum valence {max}")]
    ValenceViolation {
        atom: usize,
        element: Element,
        found: u32,
        max: u8,
    },
    #[error("multi-component SMILES ('.') is not supported")]
    MultiComponentUnsupported { pos: usize },
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("bond symbol at position {pos} is not followed by an atom")]
    DanglingBond { pos: usize },
    #[error("malformed bracket atom at position {pos}")]
    InvalidBracketAtom { pos: usize },
    #[error("formal charge {charge} at position {pos} is outside [-4, 4]")]
    ChargeOutOfRange { charge: i32, pos: usize },
    #[error("ring bond {ring} closed at position {pos} with conflicting bond orders")]
    RingBondMismatch { ring: u32, pos: usize },
    #[error("ring closure at position {pos} bonds an atom to itself")]
    SelfBond { pos: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
}

impl ParseError {
    /// Stable variant name, used by the command line and error sidecars.
    pub fn name(&self) -> &'static str {
        match self {
            ParseError::Empty => "Empty",
            ParseError::NonAscii { .. } => "NonAscii",
            ParseError::UnclosedRing { .. } => "UnclosedRing",
            ParseError::UnbalancedParen { .. } => "UnbalancedParen",
            ParseError::UnknownAtomSymbol { .. } => "UnknownAtomSymbol",
            ParseError::ValenceViolation { .. } => "ValenceViolation",
            ParseError::MultiComponentUnsupported { .. } => "MultiComponentUnsupported",
            ParseError::UnexpectedChar { .. } => "UnexpectedChar",
            ParseError::DanglingBond { .. } => "DanglingBond",
            ParseError::InvalidBracketAtom { .. } => "InvalidBracketAtom",
            ParseError::ChargeOutOfRange { .. } => "ChargeOutOfRange",
            ParseError::RingBondMismatch { .. } => "RingBondMismatch",
            ParseError::SelfBond { .. } => "SelfBond",
            ParseError::DuplicateBond { .. } => "DuplicateBond",
        }
    }
}

/// Bond symbol seen before an atom or ring digit. Stereo slashes behave like
/// an unspecified bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Implicit,
    Explicit(BondOrder),
}

impl BondSymbol {
    fn resolve(self, a_aromatic: bool, b_aromatic: bool) -> BondOrder {
        match self {
            BondSymbol::Explicit(o) => o,
            BondSymbol::Implicit if a_aromatic && b_aromatic => BondOrder::Aromatic,
            BondSymbol::Implicit => BondOrder::Single,
        }
    }
}

struct OpenRing {
    atom: usize,
    bond: BondSymbol,
    pos: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<(usize, usize, BondSymbol)>,
    prev: Option<usize>,
    branches: Vec<(usize, usize)>,
    pending: Option<(BondSymbol, usize)>,
    rings: BTreeMap<u32, OpenRing>,
}

/// Parses a single-component SMILES string into a [`MolecularGraph`].
///
/// Aromaticity is taken from the notation as written; stereo markers are
/// accepted and discarded.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, ParseError> {
    if text.is_empty() {
        return Err(ParseError::Empty);
    }
    if let Some(pos) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(ParseError::NonAscii { pos });
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: BTreeMap::new(),
    };
    p.run()?;
    p.finish(text)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.src.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), ParseError> {
        while let Some(c) = self.peek() {
            let pos = self.pos;
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(ParseError::UnexpectedChar { ch: '(', pos });
                    };
                    if self.pending.is_some() {
                        return Err(ParseError::UnexpectedChar { ch: '(', pos });
                    }
                    self.branches.push((prev, pos));
                    self.pos += 1;
                }
                b')' => {
                    if let Some((_, bpos)) = self.pending {
                        return Err(ParseError::DanglingBond { pos: bpos });
                    }
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(ParseError::UnbalancedParen { pos });
                    };
                    if self.src.get(pos.wrapping_sub(1)) == Some(&b'(') {
                        return Err(ParseError::UnexpectedChar { ch: ')', pos });
                    }
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(ParseError::UnexpectedChar { ch: c as char, pos });
                    }
                    let sym = match c {
                        b'-' => BondSymbol::Explicit(BondOrder::Single),
                        b'=' => BondSymbol::Explicit(BondOrder::Double),
                        b'#' => BondSymbol::Explicit(BondOrder::Triple),
                        b':' => BondSymbol::Explicit(BondOrder::Aromatic),
                        _ => BondSymbol::Implicit,
                    };
                    self.pending = Some((sym, pos));
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    let ring = u32::from(c - b'0');
                    self.pos += 1;
                    self.ring_closure(ring, pos)?;
                }
                b'%' => {
                    let (Some(d1), Some(d2)) = (self.peek_at(1), self.peek_at(2)) else {
                        return Err(ParseError::UnexpectedChar { ch: '%', pos });
                    };
                    if !d1.is_ascii_digit() || !d2.is_ascii_digit() {
                        return Err(ParseError::UnexpectedChar { ch: '%', pos });
                    }
                    let ring = u32::from(d1 - b'0') * 10 + u32::from(d2 - b'0');
                    self.pos += 3;
                    self.ring_closure(ring, pos)?;
                }
                b'.' => return Err(ParseError::MultiComponentUnsupported { pos }),
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
            }
        }
        Ok(())
    }

    fn add_atom(&mut self, mut atom: Atom) {
        let idx = self.atoms.len();
        atom.index = idx;
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let sym = self.pending.take().map_or(BondSymbol::Implicit, |(s, _)| s);
            self.bonds.push((prev, idx, sym));
        }
        self.prev = Some(idx);
    }

    fn ring_closure(&mut self, ring: u32, pos: usize) -> Result<(), ParseError> {
        let Some(atom) = self.prev else {
            return Err(ParseError::UnexpectedChar {
                ch: self.src[pos] as char,
                pos,
            });
        };
        let bond = self.pending.take().map_or(BondSymbol::Implicit, |(s, _)| s);
        match self.rings.remove(&ring) {
            None => {
                self.rings.insert(ring, OpenRing { atom, bond, pos });
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(ParseError::SelfBond { pos });
                }
                let sym = match (open.bond, bond) {
                    (BondSymbol::Implicit, b) => b,
                    (a, BondSymbol::Implicit) => a,
                    (a, b) if a == b => a,
                    _ => return Err(ParseError::RingBondMismatch { ring, pos }),
                };
                self.bonds.push((open.atom, atom, sym));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, ParseError> {
        let pos = self.pos;
        let c = self.src[pos];
        let next = self.peek_at(1);
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::Cl, false, 2),
            (b'B', Some(b'r')) => (Element::Br, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ if c.is_ascii_alphabetic() || c == b'*' => {
                let mut end = pos + 1;
                if c.is_ascii_uppercase() && next.is_some_and(|n| n.is_ascii_lowercase()) {
                    end += 1;
                }
                return Err(ParseError::UnknownAtomSymbol {
                    symbol: String::from_utf8_lossy(&self.src[pos..end]).into_owned(),
                    pos,
                });
            }
            _ => return Err(ParseError::UnexpectedChar { ch: c as char, pos }),
        };
        self.pos += len;
        Ok(Atom {
            element,
            formal_charge: 0,
            explicit_h: 0,
            implicit_h: 0,
            aromatic,
            isotope: None,
            bracket: false,
            index: 0,
        })
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(d) = self.peek().filter(u8::is_ascii_digit) {
            value = value.saturating_mul(10).saturating_add(u32::from(d - b'0'));
            self.pos += 1;
        }
        (self.pos > start).then_some(value)
    }

    fn bracket_atom(&mut self) -> Result<Atom, ParseError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = self.read_number();

        let sym_pos = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                let mut end = self.pos + 1;
                if self.peek_at(1).is_some_and(|n| n.is_ascii_lowercase()) {
                    end += 1;
                }
                let sym = std::str::from_utf8(&self.src[self.pos..end]).unwrap_or("");
                let element =
                    Element::from_symbol(sym).ok_or_else(|| ParseError::UnknownAtomSymbol {
                        symbol: sym.to_string(),
                        pos: sym_pos,
                    })?;
                self.pos = end;
                (element, false)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let two = matches!(
                    (c, self.peek_at(1)),
                    (b's', Some(b'e')) | (b'a', Some(b's')) | (b't', Some(b'e'))
                );
                let end = self.pos + if two { 2 } else { 1 };
                let sym = std::str::from_utf8(&self.src[self.pos..end]).unwrap_or("");
                let element = match sym {
                    "b" => Element::B,
                    "c" => Element::C,
                    "n" => Element::N,
                    "o" => Element::O,
                    "p" => Element::P,
                    "s" => Element::S,
                    _ => {
                        return Err(ParseError::UnknownAtomSymbol {
                            symbol: sym.to_string(),
                            pos: sym_pos,
                        })
                    }
                };
                self.pos = end;
                (element, true)
            }
            Some(b'*') => {
                return Err(ParseError::UnknownAtomSymbol {
                    symbol: "*".into(),
                    pos: sym_pos,
                })
            }
            _ => return Err(ParseError::InvalidBracketAtom { pos: open }),
        };

        // Chirality: '@', '@@', or '@' followed by a class like TH1 / AL2.
        if self.peek() == Some(b'@') {
            while self.peek() == Some(b'@') {
                self.pos += 1;
            }
            if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
                let class = [a, b];
                if matches!(&class, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    self.pos += 2;
                    self.read_number();
                }
            }
        }

        let mut explicit_h = 0u32;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = self.read_number().unwrap_or(1);
            if explicit_h > 8 {
                return Err(ParseError::InvalidBracketAtom { pos: open });
            }
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                charge = unit * n.min(1000) as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
            if !(-4..=4).contains(&charge) {
                return Err(ParseError::ChargeOutOfRange { charge, pos: open });
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(ParseError::InvalidBracketAtom { pos: open });
            }
        }

        if self.peek() != Some(b']') {
            return Err(ParseError::InvalidBracketAtom { pos: open });
        }
        self.pos += 1;

        Ok(Atom {
            element,
            formal_charge: charge as i8,
            explicit_h: explicit_h as u8,
            implicit_h: 0,
            aromatic,
            isotope: isotope
                .filter(|&i| i > 0)
                .map(|i| i.min(u32::from(u16::MAX)) as u16),
            bracket: true,
            index: 0,
        })
    }

    fn finish(mut self, text: &str) -> Result<MolecularGraph, ParseError> {
        if let Some((_, pos)) = self.pending {
            return Err(ParseError::DanglingBond { pos });
        }
        if let Some((_, pos)) = self.branches.first() {
            return Err(ParseError::UnbalancedParen { pos: *pos });
        }
        if let Some((&ring, open)) = self.rings.iter().next() {
            return Err(ParseError::UnclosedRing {
                ring,
                pos: open.pos,
            });
        }
        if self.atoms.is_empty() {
            return Err(ParseError::Empty);
        }

        let mut seen = std::collections::BTreeSet::new();
        let mut bonds = Vec::with_capacity(self.bonds.len());
        for &(a, b, sym) in &self.bonds {
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(ParseError::DuplicateBond { a: key.0, b: key.1 });
            }
            let order = sym.resolve(self.atoms[a].aromatic, self.atoms[b].aromatic);
            bonds.push(Bond {
                begin: a,
                end: b,
                order,
            });
        }

        let n = self.atoms.len();
        let mut half_units = vec![0u32; n];
        let mut min_orders = vec![0u32; n];
        for bond in &bonds {
            for atom in [bond.begin, bond.end] {
                half_units[atom] += bond.order.half_units();
                min_orders[atom] += bond.order.min_integral();
            }
        }
        for (i, atom) in self.atoms.iter_mut().enumerate() {
            let max = atom.element.max_valence(atom.formal_charge);
            let found = min_orders[i] + u32::from(atom.explicit_h);
            if found > u32::from(max) {
                return Err(ParseError::ValenceViolation {
                    atom: i,
                    element: atom.element,
                    found,
                    max,
                });
            }
            atom.implicit_h = implicit_hydrogens(atom, half_units[i]);
        }

        Ok(MolecularGraph::from_parts(
            self.atoms,
            bonds,
            text.to_string(),
        ))
    }
}

/// Implicit hydrogen count for an atom with the given incident bond orders
/// (in half units). Bracket atoms carry exactly their written hydrogens.
pub fn implicit_hydrogens(atom: &Atom, bond_half_units: u32) -> u8 {
    if atom.bracket {
        return 0;
    }
    let used = bond_half_units.div_ceil(2) + u32::from(atom.explicit_h);
    let valence = u32::from(atom.element.default_valence(atom.formal_charge));
    valence.saturating_sub(used) as u8
}
