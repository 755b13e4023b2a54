//! Entity class taxonomy of the LER dataset and the IOB tag grammar.
//!
//! The dataset annotates 19 fine-grained classes which fold into 7 coarse
//! groups. Four codes (`PER`, `ORG`, `RS`, `LIT`) exist at both levels, so a
//! tag is only meaningful together with the [`Granularity`] it was read at.
//! Fine and coarse classes are distinct types and never compare equal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The level of the class taxonomy a tag sequence is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Fine,
    Coarse,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Fine => "fine",
            Granularity::Coarse => "coarse",
        })
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fine" => Ok(Granularity::Fine),
            "coarse" => Ok(Granularity::Coarse),
            other => Err(format!("unknown granularity `{other}` (expected fine|coarse)")),
        }
    }
}

macro_rules! class_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => ($code:literal, $long:literal)),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Dataset abbreviation, e.g. `GRT`.
            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }

            pub fn long_name(self) -> &'static str {
                match self {
                    $($name::$variant => $long),+
                }
            }

            pub fn from_code(code: &str) -> Option<Self> {
                match code {
                    $($code => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }
    };
}

class_enum! {
    /// The 19 fine-grained legal entity classes, in dataset listing order.
    FineClass {
        Person => ("PER", "Person"),
        Judge => ("RR", "Judge"),
        Lawyer => ("AN", "Lawyer"),
        Country => ("LD", "Country"),
        City => ("ST", "City"),
        Street => ("STR", "Street"),
        Landscape => ("LDS", "Landscape"),
        Organization => ("ORG", "Organization"),
        Company => ("UN", "Company"),
        Institution => ("INN", "Institution"),
        Court => ("GRT", "Court"),
        Brand => ("MRK", "Brand"),
        Law => ("GS", "Law"),
        Ordinance => ("VO", "Ordinance"),
        EuropeanNorm => ("EUN", "European legal norm"),
        Regulation => ("VS", "Regulation"),
        Contract => ("VT", "Contract"),
        CourtDecision => ("RS", "Court decision"),
        LegalLiterature => ("LIT", "Legal literature"),
    }
}

class_enum! {
    /// The 7 coarse-grained groups.
    CoarseClass {
        Person => ("PER", "Person"),
        Location => ("LOC", "Location"),
        Organization => ("ORG", "Organization"),
        LegalNorm => ("NRM", "Legal norm"),
        CaseRegulation => ("REG", "Case-by-case regulation"),
        CourtDecision => ("RS", "Court decision"),
        LegalLiterature => ("LIT", "Legal literature"),
    }
}

impl FineClass {
    pub fn coarse(self) -> CoarseClass {
        use FineClass::*;
        match self {
            Person | Judge | Lawyer => CoarseClass::Person,
            Country | City | Street | Landscape => CoarseClass::Location,
            Organization | Company | Institution | Court | Brand => CoarseClass::Organization,
            Law | Ordinance | EuropeanNorm => CoarseClass::LegalNorm,
            Regulation | Contract => CoarseClass::CaseRegulation,
            CourtDecision => CoarseClass::CourtDecision,
            LegalLiterature => CoarseClass::LegalLiterature,
        }
    }
}

impl CoarseClass {
    /// Fine classes grouped under this coarse class, in listing order.
    pub fn members(self) -> impl Iterator<Item = FineClass> {
        FineClass::ALL.iter().copied().filter(move |c| c.coarse() == self)
    }

    /// The four groups that are specific to legal text (norms, regulations,
    /// decisions, literature).
    pub fn is_legal(self) -> bool {
        matches!(
            self,
            CoarseClass::LegalNorm
                | CoarseClass::CaseRegulation
                | CoarseClass::CourtDecision
                | CoarseClass::LegalLiterature
        )
    }
}

/// Class carried by a `B-`/`I-` tag.
///
/// `Unknown` only arises from lenient parsing and holds the raw code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityClass {
    Fine(FineClass),
    Coarse(CoarseClass),
    Unknown(String),
}

impl EntityClass {
    pub fn code(&self) -> &str {
        match self {
            EntityClass::Fine(c) => c.code(),
            EntityClass::Coarse(c) => c.code(),
            EntityClass::Unknown(code) => code,
        }
    }

    pub fn long_name(&self) -> &str {
        match self {
            EntityClass::Fine(c) => c.long_name(),
            EntityClass::Coarse(c) => c.long_name(),
            EntityClass::Unknown(code) => code,
        }
    }

    pub fn to_coarse(&self) -> EntityClass {
        match self {
            EntityClass::Fine(c) => EntityClass::Coarse(c.coarse()),
            other => other.clone(),
        }
    }

    /// Coarse group this class belongs to, if known.
    pub fn coarse_group(&self) -> Option<CoarseClass> {
        match self {
            EntityClass::Fine(c) => Some(c.coarse()),
            EntityClass::Coarse(c) => Some(*c),
            EntityClass::Unknown(_) => None,
        }
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prefix {
    B,
    I,
    O,
}

/// One IOB tag: `O`, `B-<class>` or `I-<class>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelTag {
    Outside,
    Begin(EntityClass),
    Inside(EntityClass),
}

impl LabelTag {
    pub fn prefix(&self) -> Prefix {
        match self {
            LabelTag::Outside => Prefix::O,
            LabelTag::Begin(_) => Prefix::B,
            LabelTag::Inside(_) => Prefix::I,
        }
    }

    pub fn class(&self) -> Option<&EntityClass> {
        match self {
            LabelTag::Outside => None,
            LabelTag::Begin(c) | LabelTag::Inside(c) => Some(c),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, LabelTag::Outside)
    }

    /// Replaces a fine class by its coarse group, keeping the prefix.
    pub fn to_coarse(&self) -> LabelTag {
        match self {
            LabelTag::Outside => LabelTag::Outside,
            LabelTag::Begin(c) => LabelTag::Begin(c.to_coarse()),
            LabelTag::Inside(c) => LabelTag::Inside(c.to_coarse()),
        }
    }
}

impl fmt::Display for LabelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelTag::Outside => f.write_str("O"),
            LabelTag::Begin(c) => write!(f, "B-{c}"),
            LabelTag::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

/// Whether class codes outside the taxonomy are rejected or kept opaquely.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("unknown {granularity} class `{code}` in tag `{tag}`")]
    UnknownClass {
        tag: String,
        code: String,
        granularity: Granularity,
    },
    #[error("malformed tag `{0}` (expected `O` or `B-XX`/`I-XXX`)")]
    MalformedTag(String),
}

/// Parses a tag following `O | [BI]-[A-Z]{2,3}` exactly.
pub fn parse_tag(text: &str, granularity: Granularity, mode: ParseMode) -> Result<LabelTag, TagError> {
    if text == "O" {
        return Ok(LabelTag::Outside);
    }
    let bytes = text.as_bytes();
    let malformed = || TagError::MalformedTag(text.to_owned());
    if bytes.len() < 4 || bytes.len() > 5 || bytes[1] != b'-' {
        return Err(malformed());
    }
    let code = &text[2..];
    if !code.bytes().all(|b| b.is_ascii_uppercase()) {
        return Err(malformed());
    }
    let class = match granularity {
        Granularity::Fine => FineClass::from_code(code).map(EntityClass::Fine),
        Granularity::Coarse => CoarseClass::from_code(code).map(EntityClass::Coarse),
    };
    let class = match (class, mode) {
        (Some(c), _) => c,
        (None, ParseMode::Lenient) => EntityClass::Unknown(code.to_owned()),
        (None, ParseMode::Strict) => {
            return Err(TagError::UnknownClass {
                tag: text.to_owned(),
                code: code.to_owned(),
                granularity,
            })
        }
    };
    match bytes[0] {
        b'B' => Ok(LabelTag::Begin(class)),
        b'I' => Ok(LabelTag::Inside(class)),
        _ => Err(malformed()),
    }
}

/// Strict, fine-grained parse.
impl FromStr for LabelTag {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tag(s, Granularity::Fine, ParseMode::Strict)
    }
}

/// Every tag expressible at a granularity: `O` first, then `B-`/`I-` per class.
pub fn tag_inventory(granularity: Granularity) -> Vec<LabelTag> {
    let classes: Vec<EntityClass> = match granularity {
        Granularity::Fine => FineClass::ALL.iter().map(|c| EntityClass::Fine(*c)).collect(),
        Granularity::Coarse => CoarseClass::ALL.iter().map(|c| EntityClass::Coarse(*c)).collect(),
    };
    let mut tags = vec![LabelTag::Outside];
    for c in classes {
        tags.push(LabelTag::Begin(c.clone()));
        tags.push(LabelTag::Inside(c));
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn fine(text: &str) -> Result<LabelTag, TagError> {
        parse_tag(text, Granularity::Fine, ParseMode::Strict)
    }

    #[test]
    fn parses_table_tags() {
        assert_eq!(fine("B-GRT").unwrap(), LabelTag::Begin(EntityClass::Fine(FineClass::Court)));
        assert_eq!(fine("O").unwrap(), LabelTag::Outside);
        assert_eq!(fine("I-GS").unwrap(), LabelTag::Inside(EntityClass::Fine(FineClass::Law)));
    }

    #[test]
    fn unknown_class_strict_and_lenient() {
        assert!(matches!(fine("B-XYZ"), Err(TagError::UnknownClass { .. })));
        let tag = parse_tag("B-XYZ", Granularity::Fine, ParseMode::Lenient).unwrap();
        assert_eq!(tag, LabelTag::Begin(EntityClass::Unknown("XYZ".into())));
        assert_eq!(tag.to_string(), "B-XYZ");
    }

    #[test]
    fn malformed_shapes() {
        for bad in ["", "o", "B", "B-", "B-G", "E-GS", "B_GS", "B-gs", "B-GRTX", " O", "O ", "O-", "B-G1"] {
            assert!(
                matches!(parse_tag(bad, Granularity::Fine, ParseMode::Lenient), Err(TagError::MalformedTag(_))),
                "{bad:?} should be malformed"
            );
        }
    }

    #[test]
    fn granularity_namespaces_are_separate() {
        // NRM is coarse-only, GS fine-only
        assert!(fine("B-NRM").is_err());
        assert!(parse_tag("B-GS", Granularity::Coarse, ParseMode::Strict).is_err());
        let coarse_per = parse_tag("B-PER", Granularity::Coarse, ParseMode::Strict).unwrap();
        assert_ne!(coarse_per, fine("B-PER").unwrap());
    }

    #[test]
    fn coarse_mapping_examples() {
        assert_eq!(fine("B-GRT").unwrap().to_coarse().to_string(), "B-ORG");
        assert_eq!(LabelTag::Outside.to_coarse(), LabelTag::Outside);
        let vo = fine("I-VO").unwrap().to_coarse();
        assert_eq!(vo, LabelTag::Inside(EntityClass::Coarse(CoarseClass::LegalNorm)));
    }

    #[test]
    fn taxonomy_shape() {
        assert_eq!(FineClass::ALL.len(), 19);
        assert_eq!(CoarseClass::ALL.len(), 7);
        let codes: HashSet<_> = FineClass::ALL.iter().map(|c| c.code()).collect();
        assert_eq!(codes.len(), 19);
        for code in codes {
            assert!((2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_uppercase()));
        }
        let coarse: HashSet<_> = CoarseClass::ALL.iter().map(|c| c.code()).collect();
        assert_eq!(coarse.len(), 7);
    }

    #[test]
    fn groups_partition_fine_classes() {
        let mut seen = HashSet::new();
        for group in CoarseClass::ALL {
            for member in group.members() {
                assert!(seen.insert(member), "{member} in two groups");
            }
        }
        assert_eq!(seen.len(), 19);
        let sizes: Vec<usize> = CoarseClass::ALL.iter().map(|g| g.members().count()).collect();
        assert_eq!(sizes, vec![3, 4, 5, 3, 2, 1, 1]);
    }

    #[test]
    fn inventory_round_trips() {
        for g in [Granularity::Fine, Granularity::Coarse] {
            for tag in tag_inventory(g) {
                let back = parse_tag(&tag.to_string(), g, ParseMode::Strict).unwrap();
                assert_eq!(back, tag);
                assert_eq!(tag.to_coarse().prefix(), tag.prefix());
            }
        }
        assert_eq!(tag_inventory(Granularity::Fine).len(), 39);
    }
}
