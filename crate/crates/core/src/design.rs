//! Actuator designs: module specs, the bracketed design-string grammar, and
//! lexicographic enumeration of the 38^n design space.
//!
//! A design string lists units bottom-up, e.g. `[2//3;4//6]` or `[K\\;3\\1]`.
//! Each unit is a depth digit (`2`, `3`, `4`) or `K` for a plain Kresling
//! module, a chirality token (`//` clockwise, `\\` anticlockwise) and, for
//! bistable units only, the face digit `1..=6` carrying the modified panel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// Number of distinct module choices per position: 3 depths x 2 chiralities x 6 faces + 2 Kresling.
pub const OPTIONS_PER_UNIT: usize = 38;

/// Default upper bound on the number of units in a design.
pub const DEFAULT_MAX_UNITS: usize = 15;

/// Largest `n` that `enumerate_designs` accepts without an override.
pub const ENUMERATION_GUARD: usize = 6;

/// Depth of the inset degree-four vertex of a bistable panel, in millimetres.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Depth {
    D2,
    D3,
    D4,
}

impl Depth {
    pub const ALL: [Depth; 3] = [Depth::D2, Depth::D3, Depth::D4];

    pub fn mm(self) -> u8 {
        match self {
            Depth::D2 => 2,
            Depth::D3 => 3,
            Depth::D4 => 4,
        }
    }

    pub fn from_mm(mm: u8) -> Option<Depth> {
        match mm {
            2 => Some(Depth::D2),
            3 => Some(Depth::D3),
            4 => Some(Depth::D4),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mm())
    }
}

/// Rotation sense of the upper cap relative to the lower one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Chirality {
    /// `//`
    Clockwise,
    /// `\\`
    Anticlockwise,
}

impl Chirality {
    pub fn sign(self) -> f64 {
        match self {
            Chirality::Clockwise => 1.0,
            Chirality::Anticlockwise => -1.0,
        }
    }

    pub fn flipped(self) -> Chirality {
        match self {
            Chirality::Clockwise => Chirality::Anticlockwise,
            Chirality::Anticlockwise => Chirality::Clockwise,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Chirality::Clockwise => "//",
            Chirality::Anticlockwise => "\\\\",
        }
    }
}

/// Side of the hexagon carrying the modified panel, `1..=6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Face(u8);

impl Face {
    pub fn new(index: u8) -> Option<Face> {
        (1..=6).contains(&index).then_some(Face(index))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Azimuth of the face centre in degrees; face 1 sits on +x.
    pub fn azimuth_deg(self) -> f64 {
        f64::from(self.0 - 1) * 60.0
    }

    /// Face shifted by `steps` positions, wrapping within `1..=6`.
    pub fn rotated(self, steps: i32) -> Face {
        Face(((i32::from(self.0) - 1 + steps).rem_euclid(6) + 1) as u8)
    }

    /// Face mirrored through the x-z plane (azimuth `a` goes to `-a`).
    pub fn mirrored(self) -> Face {
        Face(((8 - i32::from(self.0) - 1).rem_euclid(6) + 1) as u8)
    }
}

/// Kind of module: plain Kresling or bistable with a given depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModuleKind {
    Kresling,
    Bistable(Depth),
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::Kresling,
        ModuleKind::Bistable(Depth::D2),
        ModuleKind::Bistable(Depth::D3),
        ModuleKind::Bistable(Depth::D4),
    ];

    pub fn depth(self) -> Option<Depth> {
        match self {
            ModuleKind::Kresling => None,
            ModuleKind::Bistable(d) => Some(d),
        }
    }

    /// Key used in calibration files.
    pub fn key(self) -> &'static str {
        match self {
            ModuleKind::Kresling => "kresling",
            ModuleKind::Bistable(Depth::D2) => "delta2",
            ModuleKind::Bistable(Depth::D3) => "delta3",
            ModuleKind::Bistable(Depth::D4) => "delta4",
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleKind::Kresling => f.write_str("Kresling"),
            ModuleKind::Bistable(d) => write!(f, "bistable Δ={d}"),
        }
    }
}

/// One unit's design choice. Kresling units have no face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModuleSpec {
    Kresling {
        chirality: Chirality,
    },
    Bistable {
        depth: Depth,
        chirality: Chirality,
        face: Face,
    },
}

impl ModuleSpec {
    pub fn kind(self) -> ModuleKind {
        match self {
            ModuleSpec::Kresling { .. } => ModuleKind::Kresling,
            ModuleSpec::Bistable { depth, .. } => ModuleKind::Bistable(depth),
        }
    }

    pub fn chirality(self) -> Chirality {
        match self {
            ModuleSpec::Kresling { chirality } | ModuleSpec::Bistable { chirality, .. } => chirality,
        }
    }

    pub fn face(self) -> Option<Face> {
        match self {
            ModuleSpec::Kresling { .. } => None,
            ModuleSpec::Bistable { face, .. } => Some(face),
        }
    }

    pub fn depth(self) -> Option<Depth> {
        self.kind().depth()
    }

    /// Position of this spec in the lexicographic option order `0..38`.
    ///
    /// Bistable options come first ordered by (depth, chirality, face), then `K//`, `K\\`.
    /// This matches byte order of the unit tokens, so index order equals string order.
    pub fn option_index(self) -> usize {
        match self {
            ModuleSpec::Bistable {
                depth,
                chirality,
                face,
            } => depth.index() * 12 + chirality as usize * 6 + usize::from(face.get() - 1),
            ModuleSpec::Kresling { chirality } => 36 + chirality as usize,
        }
    }

    pub fn from_option_index(index: usize) -> Option<ModuleSpec> {
        let chir = |i: usize| {
            if i == 0 {
                Chirality::Clockwise
            } else {
                Chirality::Anticlockwise
            }
        };
        match index {
            0..=35 => Some(ModuleSpec::Bistable {
                depth: Depth::ALL[index / 12],
                chirality: chir((index % 12) / 6),
                face: Face((index % 6) as u8 + 1),
            }),
            36 | 37 => Some(ModuleSpec::Kresling {
                chirality: chir(index - 36),
            }),
            _ => None,
        }
    }

    fn face_rotated(self, steps: i32) -> ModuleSpec {
        match self {
            ModuleSpec::Bistable {
                depth,
                chirality,
                face,
            } => ModuleSpec::Bistable {
                depth,
                chirality,
                face: face.rotated(steps),
            },
            k => k,
        }
    }

    fn mirrored(self) -> ModuleSpec {
        match self {
            ModuleSpec::Kresling { chirality } => ModuleSpec::Kresling {
                chirality: chirality.flipped(),
            },
            ModuleSpec::Bistable {
                depth,
                chirality,
                face,
            } => ModuleSpec::Bistable {
                depth,
                chirality: chirality.flipped(),
                face: face.mirrored(),
            },
        }
    }
}

impl fmt::Display for ModuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleSpec::Kresling { chirality } => write!(f, "K{}", chirality.token()),
            ModuleSpec::Bistable {
                depth,
                chirality,
                face,
            } => write!(f, "{}{}{}", depth, chirality.token(), face.get()),
        }
    }
}

/// Ordered sequence of units, unit 1 at the bottom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActuatorDesign {
    units: Vec<ModuleSpec>,
}

impl ActuatorDesign {
    pub fn new(units: Vec<ModuleSpec>) -> Result<ActuatorDesign> {
        Self::with_max_units(units, DEFAULT_MAX_UNITS)
    }

    pub fn with_max_units(units: Vec<ModuleSpec>, max_units: usize) -> Result<ActuatorDesign> {
        if units.is_empty() {
            return Err(Error::Contract("a design needs at least one unit".into()));
        }
        if units.len() > max_units {
            return Err(Error::Contract(format!(
                "design has {} units, more than the maximum of {max_units}",
                units.len()
            )));
        }
        Ok(ActuatorDesign { units })
    }

    pub fn units(&self) -> &[ModuleSpec] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Unique bistable depths present, ascending.
    pub fn depths(&self) -> Vec<Depth> {
        let mut present = [false; 3];
        for u in &self.units {
            if let Some(d) = u.depth() {
                present[d.index()] = true;
            }
        }
        Depth::ALL
            .into_iter()
            .filter(|d| present[d.index()])
            .collect()
    }

    /// Design with every face shifted by `steps`; rotates the tip about z by `60° * steps`.
    pub fn face_rotated(&self, steps: i32) -> ActuatorDesign {
        ActuatorDesign {
            units: self.units.iter().map(|u| u.face_rotated(steps)).collect(),
        }
    }

    /// Mirror image through the x-z plane: chiralities flipped and faces reflected.
    pub fn mirrored(&self) -> ActuatorDesign {
        ActuatorDesign {
            units: self.units.iter().map(|u| u.mirrored()).collect(),
        }
    }

    /// Representative of this design's orbit under global face rotation: the
    /// rotation that puts the first bistable unit on face 1.
    pub fn canonical_rotation(&self) -> ActuatorDesign {
        match self.units.iter().find_map(|u| u.face()) {
            Some(face) => self.face_rotated(1 - i32::from(face.get())),
            None => self.clone(),
        }
    }

    /// Appends the units of `tail`, ignoring the unit-count limit.
    pub fn concat(&self, tail: &ActuatorDesign) -> ActuatorDesign {
        let mut units = self.units.clone();
        units.extend_from_slice(&tail.units);
        ActuatorDesign { units }
    }

    /// Position of the design in the lexicographic order of its length.
    pub fn lex_index(&self) -> u128 {
        self.units.iter().fold(0u128, |acc, u| {
            acc * OPTIONS_PER_UNIT as u128 + u.option_index() as u128
        })
    }

    /// Inverse of [`lex_index`](Self::lex_index) for a given length.
    pub fn from_lex_index(n: usize, mut index: u128) -> Option<ActuatorDesign> {
        if n == 0 || index >= design_count(n) {
            return None;
        }
        let mut units = vec![ModuleSpec::Kresling {
            chirality: Chirality::Clockwise,
        }; n];
        for slot in units.iter_mut().rev() {
            *slot = ModuleSpec::from_option_index((index % OPTIONS_PER_UNIT as u128) as usize)?;
            index /= OPTIONS_PER_UNIT as u128;
        }
        Some(ActuatorDesign { units })
    }
}

impl fmt::Display for ActuatorDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, u) in self.units.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{u}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for ActuatorDesign {
    type Err = ParseDesignError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_design(s)
    }
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position} in design string")]
pub struct ParseDesignError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("Δ must be 2, 3, or 4 (found {0})")]
    BadDepth(char),
    #[error("face must be in 1..6 (found {0})")]
    BadFace(char),
    #[error("Kresling unit cannot carry a face index")]
    FaceOnKresling,
    #[error("bistable unit requires a face index")]
    MissingFace,
    #[error("trailing input")]
    Trailing,
    #[error("design has more than {0} units")]
    TooLong(usize),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, kind: ParseErrorKind) -> ParseDesignError {
        ParseDesignError {
            position: self.pos,
            kind,
        }
    }

    fn expect(&mut self, byte: u8, what: &'static str) -> std::result::Result<(), ParseDesignError> {
        self.skip_ws();
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(ParseErrorKind::Expected(what)))
        }
    }

    fn chirality(&mut self) -> std::result::Result<Chirality, ParseDesignError> {
        let rest = &self.bytes[self.pos..];
        if rest.starts_with(b"//") {
            self.pos += 2;
            Ok(Chirality::Clockwise)
        } else if rest.starts_with(b"\\\\") {
            self.pos += 2;
            Ok(Chirality::Anticlockwise)
        } else {
            Err(self.err(ParseErrorKind::Expected("chirality `//` or `\\\\`")))
        }
    }

    fn unit(&mut self) -> std::result::Result<ModuleSpec, ParseDesignError> {
        self.skip_ws();
        let head = self
            .peek()
            .ok_or_else(|| self.err(ParseErrorKind::Expected("unit")))?;
        let head_pos = self.pos;
        let kind = match head {
            b'K' | b'k' => ModuleKind::Kresling,
            b'0'..=b'9' => match Depth::from_mm(head - b'0') {
                Some(d) => ModuleKind::Bistable(d),
                None => return Err(self.err(ParseErrorKind::BadDepth(head as char))),
            },
            _ => return Err(self.err(ParseErrorKind::Expected("`K` or a depth digit"))),
        };
        self.pos += 1;
        let chirality = self.chirality()?;
        let face = match self.peek() {
            Some(b @ b'0'..=b'9') => {
                if kind == ModuleKind::Kresling {
                    return Err(self.err(ParseErrorKind::FaceOnKresling));
                }
                let face = Face::new(b - b'0').ok_or_else(|| self.err(ParseErrorKind::BadFace(b as char)))?;
                self.pos += 1;
                Some(face)
            }
            _ => None,
        };
        match (kind, face) {
            (ModuleKind::Kresling, _) => Ok(ModuleSpec::Kresling { chirality }),
            (ModuleKind::Bistable(depth), Some(face)) => Ok(ModuleSpec::Bistable {
                depth,
                chirality,
                face,
            }),
            (ModuleKind::Bistable(_), None) => Err(ParseDesignError {
                position: head_pos,
                kind: ParseErrorKind::MissingFace,
            }),
        }
    }
}

/// Parses a bracketed design string. Whitespace between tokens and a lowercase `k` are accepted.
pub fn parse_design(text: &str) -> std::result::Result<ActuatorDesign, ParseDesignError> {
    let mut cur = Cursor {
        bytes: text.as_bytes(),
        pos: 0,
    };
    cur.expect(b'[', "`[`")?;
    let mut units = vec![cur.unit()?];
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some(b';') => {
                cur.pos += 1;
                if units.len() == DEFAULT_MAX_UNITS {
                    return Err(cur.err(ParseErrorKind::TooLong(DEFAULT_MAX_UNITS)));
                }
                units.push(cur.unit()?);
            }
            Some(b']') => {
                cur.pos += 1;
                break;
            }
            _ => return Err(cur.err(ParseErrorKind::Expected("`;` or `]`"))),
        }
    }
    cur.skip_ws();
    if cur.pos != cur.bytes.len() {
        return Err(cur.err(ParseErrorKind::Trailing));
    }
    Ok(ActuatorDesign { units })
}

/// `38^n`.
pub fn design_count(n: usize) -> u128 {
    (OPTIONS_PER_UNIT as u128).pow(n as u32)
}

/// Lexicographic iterator over all designs with a fixed number of units.
#[derive(Clone, Debug)]
pub struct DesignIter {
    n: usize,
    next: u128,
    end: u128,
}

impl DesignIter {
    /// Iterator over the lexicographic index range `start..end`, for chunked evaluation.
    pub fn range(n: usize, start: u128, end: u128) -> DesignIter {
        let total = design_count(n);
        DesignIter {
            n,
            next: start.min(total),
            end: end.min(total),
        }
    }
}

impl Iterator for DesignIter {
    type Item = ActuatorDesign;

    fn next(&mut self) -> Option<ActuatorDesign> {
        if self.next >= self.end {
            return None;
        }
        let design = ActuatorDesign::from_lex_index(self.n, self.next);
        self.next += 1;
        design
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }

    fn nth(&mut self, n: usize) -> Option<ActuatorDesign> {
        self.next = self.next.saturating_add(n as u128);
        self.next()
    }
}

impl ExactSizeIterator for DesignIter {}

/// All `38^n` designs of `n` units in lexicographic order. Fails for `n` above
/// [`ENUMERATION_GUARD`] unless `force` is set.
pub fn enumerate_designs(n: usize, force: bool) -> Result<DesignIter> {
    if n == 0 {
        return Err(Error::Contract("n must be at least 1".into()));
    }
    if n > DEFAULT_MAX_UNITS {
        return Err(Error::Contract(format!(
            "n = {n} exceeds the maximum of {DEFAULT_MAX_UNITS} units"
        )));
    }
    if n > ENUMERATION_GUARD && !force {
        return Err(Error::Guard {
            n,
            limit: ENUMERATION_GUARD,
        });
    }
    Ok(DesignIter::range(n, 0, design_count(n)))
}
