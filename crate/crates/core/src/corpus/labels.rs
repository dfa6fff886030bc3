use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The three discourse categories, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Category 1: the tweet contains a scientific claim.
    Claim,
    /// Category 2: the tweet refers to a scientific study or publication.
    Reference,
    /// Category 3: the tweet mentions a scientific entity.
    Entity,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Claim, Category::Reference, Category::Entity];

    /// Zero-based column position.
    pub fn position(self) -> usize {
        match self {
            Category::Claim => 0,
            Category::Reference => 1,
            Category::Entity => 2,
        }
    }

    /// One-based category number as used in the task description.
    pub fn number(self) -> usize {
        self.position() + 1
    }

    pub fn from_number(number: usize) -> Option<Category> {
        match number {
            1 => Some(Category::Claim),
            2 => Some(Category::Reference),
            3 => Some(Category::Entity),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cat{}", self.number())
    }
}

/// Binary membership in each of the three categories.
///
/// Serialises as the canonical list form `[1.0, 0.0, 1.0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LabelVector([bool; 3]);

impl LabelVector {
    pub const NONE: LabelVector = LabelVector([false; 3]);

    pub fn new(claim: bool, reference: bool, entity: bool) -> Self {
        LabelVector([claim, reference, entity])
    }

    pub fn from_bits(bits: [u8; 3]) -> Self {
        LabelVector([bits[0] != 0, bits[1] != 0, bits[2] != 0])
    }

    /// Coerce three numbers to labels: `>= 0.5` maps to 1.
    pub fn from_scores(scores: [f64; 3]) -> Self {
        LabelVector(scores.map(|v| v >= 0.5))
    }

    pub fn claim(&self) -> bool {
        self.0[0]
    }

    pub fn reference(&self) -> bool {
        self.0[1]
    }

    pub fn entity(&self) -> bool {
        self.0[2]
    }

    pub fn get(&self, category: Category) -> bool {
        self.0[category.position()]
    }

    pub fn set(&mut self, category: Category, value: bool) {
        self.0[category.position()] = value;
    }

    pub fn with(mut self, category: Category, value: bool) -> Self {
        self.set(category, value);
        self
    }

    pub fn bits(&self) -> [u8; 3] {
        self.0.map(u8::from)
    }

    pub fn is_none(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    /// All eight possible vectors, in binary counting order.
    pub fn all() -> impl Iterator<Item = LabelVector> {
        (0u8..8).map(|n| LabelVector([n & 4 != 0, n & 2 != 0, n & 1 != 0]))
    }

    /// Canonical serialisation, e.g. `[0.0, 1.0, 1.0]`.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.bits();
        write!(f, "[{a}.0, {b}.0, {c}.0]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelParseError {
    #[error("label list {input:?} is not enclosed in brackets")]
    MissingBrackets { input: String },
    #[error("label list {input:?} has {found} elements, expected 3")]
    WrongArity { input: String, found: usize },
    #[error("label list {input:?} has non-numeric element {element:?}")]
    NonNumeric { input: String, element: String },
}

impl LabelParseError {
    pub fn input(&self) -> &str {
        match self {
            LabelParseError::MissingBrackets { input }
            | LabelParseError::WrongArity { input, .. }
            | LabelParseError::NonNumeric { input, .. } => input,
        }
    }
}

/// Parse a bracketed numeric triple such as `[1.0, 1.0, 0]`.
///
/// Whitespace around the brackets and elements is ignored. Elements are
/// integers or decimals and are coerced with the `>= 0.5` rule.
pub fn parse_label_vector(raw: &str) -> Result<LabelVector, LabelParseError> {
    let trimmed = raw.trim();
    let body = trimmed
        .strip_prefix('[')
        .and_then(|rest| rest.strip_suffix(']'))
        .ok_or_else(|| LabelParseError::MissingBrackets {
            input: raw.to_owned(),
        })?;
    parse_triple_body(body)
        .map(LabelVector::from_scores)
        .map_err(|kind| kind.into_error(raw))
}

impl FromStr for LabelVector {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label_vector(s)
    }
}

impl Serialize for LabelVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_label_vector(&raw).map_err(serde::de::Error::custom)
    }
}

pub(crate) enum TripleError {
    Arity(usize),
    NonNumeric(String),
}

impl TripleError {
    fn into_error(self, raw: &str) -> LabelParseError {
        match self {
            TripleError::Arity(found) => LabelParseError::WrongArity {
                input: raw.to_owned(),
                found,
            },
            TripleError::NonNumeric(element) => LabelParseError::NonNumeric {
                input: raw.to_owned(),
                element,
            },
        }
    }
}

/// Parse the inside of a bracketed list into exactly three numbers.
pub(crate) fn parse_triple_body(body: &str) -> Result<[f64; 3], TripleError> {
    if body.trim().is_empty() {
        return Err(TripleError::Arity(0));
    }
    let mut values = [0.0; 3];
    let mut count = 0;
    for element in body.split(',') {
        let element = element.trim();
        let value = parse_number(element).ok_or_else(|| TripleError::NonNumeric(element.to_owned()))?;
        if count < 3 {
            values[count] = value;
        }
        count += 1;
    }
    if count != 3 {
        return Err(TripleError::Arity(count));
    }
    Ok(values)
}

/// `[+-]?digits[.digits]` or `[+-]?.digits`; no exponents, no inf/nan.
fn parse_number(s: &str) -> Option<f64> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    let valid = all_digits(int_part)
        && frac_part.is_none_or(all_digits)
        && (!int_part.is_empty() || frac_part.is_some_and(|f| !f.is_empty()));
    if !valid {
        return None;
    }
    s.parse::<f64>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_prompt_examples() {
        assert_eq!(parse_label_vector("[1.0, 1.0, 0]").unwrap(), LabelVector::new(true, true, false));
        assert_eq!(parse_label_vector("[0.0, 0.0, 0.0]").unwrap(), LabelVector::NONE);
        assert_eq!(parse_label_vector("[1.0, 0, 0]").unwrap(), LabelVector::new(true, false, false));
        assert_eq!(parse_label_vector(" [ 0,0 ,1 ] ").unwrap(), LabelVector::new(false, false, true));
    }

    #[test]
    fn coerces_by_half_rounding() {
        assert_eq!(parse_label_vector("[0.7, 0.5, 0.49999]").unwrap(), LabelVector::new(true, true, false));
        assert_eq!(parse_label_vector("[-1, 2, .5]").unwrap(), LabelVector::new(false, true, true));
    }

    #[test]
    fn rejects_wrong_arity() {
        assert_eq!(
            parse_label_vector("[1,0]"),
            Err(LabelParseError::WrongArity { input: "[1,0]".into(), found: 2 })
        );
        assert!(matches!(parse_label_vector("[]"), Err(LabelParseError::WrongArity { found: 0, .. })));
        assert!(matches!(parse_label_vector("[1,0,0,1]"), Err(LabelParseError::WrongArity { found: 4, .. })));
    }

    #[test]
    fn rejects_non_numeric_and_unbracketed() {
        assert!(matches!(
            parse_label_vector("[1, x, 0]"),
            Err(LabelParseError::NonNumeric { element, .. }) if element == "x"
        ));
        assert!(matches!(parse_label_vector("[1, , 0]"), Err(LabelParseError::NonNumeric { .. })));
        assert!(matches!(parse_label_vector("[nan, 0, 0]"), Err(LabelParseError::NonNumeric { .. })));
        assert!(matches!(parse_label_vector("[1e0, 0, 0]"), Err(LabelParseError::NonNumeric { .. })));
        assert!(matches!(parse_label_vector("1, 0, 0"), Err(LabelParseError::MissingBrackets { .. })));
        let err = parse_label_vector("(1, 0, 0)").unwrap_err();
        assert_eq!(err.input(), "(1, 0, 0)");
    }

    #[test]
    fn canonical_form() {
        assert_eq!(LabelVector::new(false, true, true).to_string(), "[0.0, 1.0, 1.0]");
        assert_eq!(LabelVector::all().count(), 8);
        for v in LabelVector::all() {
            assert_eq!(parse_label_vector(&v.canonical()).unwrap(), v);
        }
    }

    #[test]
    fn serde_uses_canonical_string() {
        let v = LabelVector::new(true, false, true);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, "\"[1.0, 0.0, 1.0]\"");
        assert_eq!(serde_json::from_str::<LabelVector>(&json).unwrap(), v);
    }

    fn number_text() -> impl Strategy<Value = String> {
        prop_oneof![
            (0u32..3).prop_map(|n| n.to_string()),
            (0.0f64..1.5).prop_map(|x| format!("{x:.3}")),
            (0.0f64..1.0).prop_map(|x| format!("{x}")),
        ]
    }

    proptest! {
        #[test]
        fn accepted_inputs_round_trip(
            a in number_text(), b in number_text(), c in number_text(),
            pad in "[ \t]{0,2}",
        ) {
            let raw = format!("{pad}[{a},{pad}{b} ,{c}]{pad}");
            let parsed = parse_label_vector(&raw).unwrap();
            prop_assert_eq!(parse_label_vector(&parsed.canonical()).unwrap(), parsed);
        }

        #[test]
        fn never_panics(raw in "\\PC{0,40}") {
            let _ = parse_label_vector(&raw);
        }
    }
}
