//! Unit expressions, dimensional analysis and quantity arithmetic.
//!
//! Unit strings follow a small astropy-like grammar: whitelisted SI symbols
//! with optional metric prefixes, joined by `*` and `/`, with integer
//! exponents written `^n`. `/` applies to the single factor that follows it,
//! so `kg*m^2/s^3/A` is `kg * m^2 * s^-3 * A^-1`.
//!
//! Scales are exact rationals relative to the coherent SI unit, so prefix
//! chains such as `mV -> V -> kV` compose without floating point drift.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Names of the seven SI base dimensions, in exponent-vector order.
pub const BASE_DIMENSIONS: [&str; 7] = [
    "length",
    "mass",
    "time",
    "current",
    "temperature",
    "amount",
    "luminous_intensity",
];

const DIMENSION_SYMBOLS: [&str; 7] = ["L", "M", "T", "I", "Θ", "N", "J"];

/// Coherent symbols used when rendering a canonical unit string.
const CANONICAL_SYMBOLS: [&str; 7] = ["m", "kg", "s", "A", "K", "mol", "cd"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("empty unit expression")]
    EmptyExpression,
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("malformed unit expression `{text}`: {reason}")]
    SyntaxError { text: String, reason: String },
    #[error("dimension mismatch: {from} is incompatible with {to}")]
    DimensionMismatch { from: Dimension, to: Dimension },
    #[error("division by zero")]
    DivisionByZero,
    #[error("malformed quantity `{0}`")]
    BadQuantity(String),
}

impl UnitError {
    pub fn code(&self) -> &'static str {
        match self {
            UnitError::EmptyExpression => "UNIT_EMPTY",
            UnitError::UnknownUnit(_) => "UNIT_UNKNOWN",
            UnitError::SyntaxError { .. } => "UNIT_SYNTAX",
            UnitError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            UnitError::DivisionByZero => "DIVISION_BY_ZERO",
            UnitError::BadQuantity(_) => "QUANTITY_SYNTAX",
        }
    }
}

/// Exponents over the SI base dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dimension(pub [i32; 7]);

impl Dimension {
    pub const DIMENSIONLESS: Dimension = Dimension([0; 7]);

    pub const fn new(exponents: [i32; 7]) -> Self {
        Dimension(exponents)
    }

    pub fn exponents(&self) -> [i32; 7] {
        self.0
    }

    pub fn is_dimensionless(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn powi(self, n: i32) -> Self {
        let mut out = self.0;
        for e in &mut out {
            *e *= n;
        }
        Dimension(out)
    }
}

impl Add for Dimension {
    type Output = Dimension;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(rhs.0) {
            *a += b;
        }
        Dimension(out)
    }
}

impl Sub for Dimension {
    type Output = Dimension;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for Dimension {
    type Output = Dimension;
    fn neg(self) -> Self {
        self.powi(-1)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return write!(f, "dimensionless {:?}", self.0);
        }
        let mut parts = Vec::new();
        for (sym, &e) in DIMENSION_SYMBOLS.iter().zip(&self.0) {
            match e {
                0 => {}
                1 => parts.push(sym.to_string()),
                _ => parts.push(format!("{sym}^{e}")),
            }
        }
        write!(f, "{} {:?}", parts.join(" "), self.0)
    }
}

// Exponent vectors: [L, M, T, I, Θ, N, J].
const D_LENGTH: Dimension = Dimension([1, 0, 0, 0, 0, 0, 0]);
const D_MASS: Dimension = Dimension([0, 1, 0, 0, 0, 0, 0]);
const D_TIME: Dimension = Dimension([0, 0, 1, 0, 0, 0, 0]);
const D_CURRENT: Dimension = Dimension([0, 0, 0, 1, 0, 0, 0]);
const D_TEMPERATURE: Dimension = Dimension([0, 0, 0, 0, 1, 0, 0]);
const D_AMOUNT: Dimension = Dimension([0, 0, 0, 0, 0, 1, 0]);
const D_LUMINOUS: Dimension = Dimension([0, 0, 0, 0, 0, 0, 1]);

/// (symbol, power of ten relative to the coherent unit, dimension)
const UNITS: &[(&str, i32, Dimension)] = &[
    ("m", 0, D_LENGTH),
    ("g", -3, D_MASS),
    ("s", 0, D_TIME),
    ("A", 0, D_CURRENT),
    ("K", 0, D_TEMPERATURE),
    ("mol", 0, D_AMOUNT),
    ("cd", 0, D_LUMINOUS),
    ("V", 0, Dimension([2, 1, -3, -1, 0, 0, 0])),
    ("Ohm", 0, Dimension([2, 1, -3, -2, 0, 0, 0])),
    ("W", 0, Dimension([2, 1, -3, 0, 0, 0, 0])),
    ("Hz", 0, Dimension([0, 0, -1, 0, 0, 0, 0])),
    ("N", 0, Dimension([1, 1, -2, 0, 0, 0, 0])),
    ("J", 0, Dimension([2, 1, -2, 0, 0, 0, 0])),
    ("Pa", 0, Dimension([-1, 1, -2, 0, 0, 0, 0])),
    ("C", 0, Dimension([0, 0, 1, 1, 0, 0, 0])),
    ("F", 0, Dimension([-2, -1, 4, 2, 0, 0, 0])),
    ("S", 0, Dimension([-2, -1, 3, 2, 0, 0, 0])),
];

const PREFIXES: &[(&str, i32)] = &[
    ("y", -24),
    ("z", -21),
    ("a", -18),
    ("f", -15),
    ("p", -12),
    ("n", -9),
    ("u", -6),
    ("µ", -6),
    ("μ", -6),
    ("m", -3),
    ("c", -2),
    ("d", -1),
    ("da", 1),
    ("h", 2),
    ("k", 3),
    ("M", 6),
    ("G", 9),
    ("T", 12),
    ("P", 15),
    ("E", 18),
    ("Z", 21),
    ("Y", 24),
];

/// Symbols accepted by the parser, without prefixes.
pub fn unit_symbols() -> impl Iterator<Item = &'static str> {
    UNITS.iter().map(|(s, _, _)| *s)
}

/// Metric prefixes accepted by the parser (ASCII forms only).
pub fn prefix_symbols() -> impl Iterator<Item = &'static str> {
    PREFIXES.iter().map(|(p, _)| *p).filter(|p| p.is_ascii())
}

fn pow10(n: i32) -> BigRational {
    BigRational::from_integer(BigInt::from(10)).pow(n)
}

/// A parsed unit: exact scale relative to the coherent SI unit plus dimension.
///
/// Equality and hashing consider only `scale` and `dims`; the optional label
/// remembers how the unit was spelled for display purposes.
#[derive(Debug, Clone)]
pub struct UnitExpr {
    scale: BigRational,
    dims: Dimension,
    label: Option<String>,
}

impl PartialEq for UnitExpr {
    fn eq(&self, other: &Self) -> bool {
        self.scale == other.scale && self.dims == other.dims
    }
}

impl Eq for UnitExpr {}

impl std::hash::Hash for UnitExpr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.scale.hash(state);
        self.dims.hash(state);
    }
}

impl UnitExpr {
    /// Builds a unit from its parts. `scale` must be positive.
    pub fn new(scale: BigRational, dims: Dimension) -> Result<Self, UnitError> {
        if !scale.is_positive() {
            return Err(UnitError::SyntaxError {
                text: scale.to_string(),
                reason: "scale must be positive".into(),
            });
        }
        Ok(UnitExpr {
            scale,
            dims,
            label: None,
        })
    }

    pub fn dimensionless() -> Self {
        UnitExpr {
            scale: BigRational::one(),
            dims: Dimension::DIMENSIONLESS,
            label: None,
        }
    }

    pub fn scale(&self) -> &BigRational {
        &self.scale
    }

    pub fn dims(&self) -> Dimension {
        self.dims
    }

    pub fn is_convertible_to(&self, other: &UnitExpr) -> bool {
        self.dims == other.dims
    }

    /// The spelling the unit was parsed from, or the canonical text.
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.canonical_text())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn mul(&self, rhs: &UnitExpr) -> UnitExpr {
        UnitExpr {
            scale: &self.scale * &rhs.scale,
            dims: self.dims + rhs.dims,
            label: None,
        }
    }

    pub fn div(&self, rhs: &UnitExpr) -> UnitExpr {
        UnitExpr {
            scale: &self.scale / &rhs.scale,
            dims: self.dims - rhs.dims,
            label: None,
        }
    }

    pub fn powi(&self, n: i32) -> UnitExpr {
        UnitExpr {
            scale: self.scale.pow(n),
            dims: self.dims.powi(n),
            label: None,
        }
    }

    /// Normalized rendering that [`parse_unit`] maps back to an equal unit.
    ///
    /// The numeric scale comes first (`10^n` for powers of ten, otherwise an
    /// integer numerator and `/denominator`), followed by coherent base
    /// symbols with positive exponents and then `/`-joined negative ones.
    pub fn canonical_text(&self) -> String {
        let mut numer: Vec<String> = Vec::new();
        let mut denom: Vec<String> = Vec::new();

        if let Some(n) = power_of_ten(&self.scale) {
            if n != 0 {
                numer.push(format!("10^{n}"));
            }
        } else {
            if !self.scale.numer().is_one() {
                numer.push(self.scale.numer().to_string());
            }
            if !self.scale.denom().is_one() {
                denom.push(self.scale.denom().to_string());
            }
        }

        for (sym, &e) in CANONICAL_SYMBOLS.iter().zip(&self.dims.0) {
            match e {
                0 => {}
                1 => numer.push(sym.to_string()),
                e if e > 0 => numer.push(format!("{sym}^{e}")),
                -1 => denom.push(sym.to_string()),
                e => denom.push(format!("{sym}^{}", -e)),
            }
        }

        let mut out = if numer.is_empty() {
            "1".to_string()
        } else {
            numer.join("*")
        };
        for d in denom {
            out.push('/');
            out.push_str(&d);
        }
        out
    }
}

fn power_of_ten(r: &BigRational) -> Option<i32> {
    let ten = BigInt::from(10);
    let reduce = |v: &BigInt| -> Option<i32> {
        let mut v = v.clone();
        let mut n = 0;
        while !v.is_one() {
            if (&v % &ten).is_zero() {
                v /= &ten;
                n += 1;
            } else {
                return None;
            }
        }
        Some(n)
    };
    Some(reduce(r.numer())? - reduce(r.denom())?)
}

impl fmt::Display for UnitExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

impl FromStr for UnitExpr {
    type Err = UnitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_unit(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Symbol(String),
    Integer(String),
    Mul,
    Div,
    Pow,
    Minus,
    Plus,
}

fn tokenize(text: &str) -> Result<Vec<Token>, UnitError> {
    let syntax = |reason: String| UnitError::SyntaxError {
        text: text.to_string(),
        reason,
    };
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    // Whether whitespace separated the previous token from the next one.
    let mut gap = false;
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            gap = true;
            continue;
        }
        let operand = c.is_alphabetic() || c.is_ascii_digit();
        if operand && gap {
            if let Some(Token::Symbol(_) | Token::Integer(_)) = tokens.last() {
                return Err(syntax("juxtaposed factors need an explicit `*`".into()));
            }
        }
        gap = false;
        match c {
            '*' => {
                chars.next();
                tokens.push(Token::Mul);
            }
            '/' => {
                chars.next();
                tokens.push(Token::Div);
            }
            '^' => {
                chars.next();
                tokens.push(Token::Pow);
            }
            '-' => {
                chars.next();
                tokens.push(Token::Minus);
            }
            '+' => {
                chars.next();
                tokens.push(Token::Plus);
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Integer(s));
            }
            c if c.is_alphabetic() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphabetic() {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Symbol(s));
            }
            other => return Err(syntax(format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

fn lookup_symbol(symbol: &str) -> Option<(i32, Dimension)> {
    let symbol = if symbol == "Ω" { "Ohm" } else { symbol };
    if let Some((_, p, d)) = UNITS.iter().find(|(s, _, _)| *s == symbol) {
        return Some((*p, *d));
    }
    let mut found = None;
    for (prefix, pp) in PREFIXES {
        if let Some(rest) = symbol.strip_prefix(prefix) {
            let rest = if rest == "Ω" { "Ohm" } else { rest };
            if let Some((_, p, d)) = UNITS.iter().find(|(s, _, _)| *s == rest) {
                if found.is_some() {
                    // Two readings of the same symbol; the table has none today.
                    return None;
                }
                found = Some((pp + p, *d));
            }
        }
    }
    found
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, reason: impl Into<String>) -> UnitError {
        UnitError::SyntaxError {
            text: self.text.to_string(),
            reason: reason.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expression(&mut self) -> Result<UnitExpr, UnitError> {
        let mut acc = self.factor()?;
        while let Some(tok) = self.next() {
            match tok {
                Token::Mul => acc = acc.mul(&self.factor()?),
                Token::Div => acc = acc.div(&self.factor()?),
                other => return Err(self.syntax(format!("expected `*` or `/`, found {other:?}"))),
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<UnitExpr, UnitError> {
        let base = match self.next() {
            Some(Token::Symbol(sym)) => {
                let (p, dims) =
                    lookup_symbol(&sym).ok_or_else(|| UnitError::UnknownUnit(sym.clone()))?;
                UnitExpr {
                    scale: pow10(p),
                    dims,
                    label: None,
                }
            }
            Some(Token::Integer(digits)) => {
                let value: BigInt = digits.parse().map_err(|_| self.syntax("bad integer"))?;
                if value.is_zero() {
                    return Err(self.syntax("numeric factor must be positive"));
                }
                UnitExpr {
                    scale: BigRational::from_integer(value),
                    dims: Dimension::DIMENSIONLESS,
                    label: None,
                }
            }
            Some(other) => return Err(self.syntax(format!("expected a unit, found {other:?}"))),
            None => return Err(self.syntax("expected a unit at end of input")),
        };
        if self.peek() == Some(&Token::Pow) {
            self.next();
            let exp = self.exponent()?;
            return Ok(base.powi(exp));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, UnitError> {
        let negative = match self.peek() {
            Some(Token::Minus) => {
                self.next();
                true
            }
            Some(Token::Plus) => {
                self.next();
                false
            }
            _ => false,
        };
        match self.next() {
            Some(Token::Integer(digits)) => {
                let v: i32 = digits
                    .parse()
                    .map_err(|_| self.syntax("exponent out of range"))?;
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.syntax("expected an integer exponent after `^`")),
        }
    }
}

/// Parses a unit expression such as `mV`, `K` or `kg*m^2/s^3/A`.
pub fn parse_unit(text: &str) -> Result<UnitExpr, UnitError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(UnitError::EmptyExpression);
    }
    let tokens = tokenize(trimmed)?;
    let mut parser = Parser {
        text: trimmed,
        tokens,
        pos: 0,
    };
    let unit = parser.expression()?;
    Ok(unit.with_label(trimmed))
}

/// Exact factor `f` such that a value in `from` equals `f` times the value in `to`.
pub fn conversion_factor(from: &UnitExpr, to: &UnitExpr) -> Result<BigRational, UnitError> {
    if from.dims != to.dims {
        return Err(UnitError::DimensionMismatch {
            from: from.dims,
            to: to.dims,
        });
    }
    Ok(&from.scale / &to.scale)
}

/// Applies an exact rational factor to a float: multiply by the numerator,
/// then divide by the denominator.
pub fn apply_factor(value: f64, factor: &BigRational) -> f64 {
    let numer = factor.numer().to_f64().unwrap_or(f64::INFINITY);
    let denom = factor.denom().to_f64().unwrap_or(f64::INFINITY);
    if factor.numer().is_one() {
        value / denom
    } else if factor.denom().is_one() {
        value * numer
    } else if numer.is_finite() && denom.is_finite() {
        value * numer / denom
    } else {
        value * factor.to_f64().unwrap_or(f64::NAN)
    }
}

/// A floating point magnitude paired with a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub magnitude: f64,
    pub unit: UnitExpr,
}

impl Quantity {
    pub fn new(magnitude: f64, unit: UnitExpr) -> Self {
        Quantity { magnitude, unit }
    }

    pub fn mul(&self, rhs: &Quantity) -> Quantity {
        Quantity {
            magnitude: self.magnitude * rhs.magnitude,
            unit: self.unit.mul(&rhs.unit),
        }
    }

    pub fn div(&self, rhs: &Quantity) -> Result<Quantity, UnitError> {
        if rhs.magnitude == 0.0 {
            return Err(UnitError::DivisionByZero);
        }
        Ok(Quantity {
            magnitude: self.magnitude / rhs.magnitude,
            unit: self.unit.div(&rhs.unit),
        })
    }

    /// Sum expressed in the left operand's unit.
    pub fn add(&self, rhs: &Quantity) -> Result<Quantity, UnitError> {
        let f = conversion_factor(&rhs.unit, &self.unit)?;
        Ok(Quantity {
            magnitude: self.magnitude + apply_factor(rhs.magnitude, &f),
            unit: self.unit.clone(),
        })
    }

    pub fn sub(&self, rhs: &Quantity) -> Result<Quantity, UnitError> {
        self.add(&Quantity::new(-rhs.magnitude, rhs.unit.clone()))
    }

    pub fn convert_to(&self, target: &UnitExpr) -> Result<Quantity, UnitError> {
        let f = conversion_factor(&self.unit, target)?;
        Ok(Quantity {
            magnitude: apply_factor(self.magnitude, &f),
            unit: target.clone(),
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unit.dims.is_dimensionless() && self.unit.scale.is_one() {
            write!(f, "{}", self.magnitude)
        } else {
            write!(f, "{} {}", self.magnitude, self.unit.label())
        }
    }
}

/// Parses `"<number> <unit>"`, e.g. `5 mA`. A bare number is dimensionless.
impl FromStr for Quantity {
    type Err = UnitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s.find(|c: char| c.is_whitespace()).unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let magnitude: f64 = num
            .parse()
            .map_err(|_| UnitError::BadQuantity(s.to_string()))?;
        let unit = unit.trim();
        let unit = if unit.is_empty() {
            UnitExpr::dimensionless()
        } else {
            parse_unit(unit)?
        };
        Ok(Quantity { magnitude, unit })
    }
}
