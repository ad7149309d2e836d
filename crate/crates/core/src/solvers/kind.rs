use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Selection rule for one side (rows or columns) of a method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// One index with probability ∝ squared norm.
    NormWeighted,
    /// Two distinct indices ∝ squared norm from a fresh uniform sample of the
    /// given fraction.
    NormPairSampled(f64),
    /// Greedy set, then one residual-weighted pick.
    Greedy,
    /// Greedy set, then two distinct residual-weighted picks.
    GreedyPair,
    /// Largest homogeneous residual.
    Argmax,
    /// Two largest homogeneous residuals.
    TopTwo,
    /// Two largest homogeneous residuals within a fresh uniform sample.
    TopTwoSampled(f64),
}

impl Rule {
    /// Does the rule look at every residual component each step?
    pub fn needs_full_residual(self) -> bool {
        matches!(self, Rule::Greedy | Rule::GreedyPair | Rule::Argmax | Rule::TopTwo)
    }

    pub fn is_randomized(self) -> bool {
        !matches!(self, Rule::Argmax | Rule::TopTwo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SolverKind {
    Rek,
    TrekAlt,
    Treks,
    Grek,
    Srek,
    Tgrek,
    Tsrek,
    Tsreks,
    Rk,
    Trks,
    Tgrk,
    Tsrk,
    Tsrks,
    Gproj,
    Sproj,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method {0:?}; expected one of {names}", names = SolverKind::ALL.map(|k| k.name()).join(", "))]
pub struct UnknownMethod(pub String);

impl SolverKind {
    pub const ALL: [SolverKind; 15] = [
        SolverKind::Rek,
        SolverKind::TrekAlt,
        SolverKind::Treks,
        SolverKind::Grek,
        SolverKind::Srek,
        SolverKind::Tgrek,
        SolverKind::Tsrek,
        SolverKind::Tsreks,
        SolverKind::Rk,
        SolverKind::Trks,
        SolverKind::Tgrk,
        SolverKind::Tsrk,
        SolverKind::Tsrks,
        SolverKind::Gproj,
        SolverKind::Sproj,
    ];

    pub const EXTENDED: [SolverKind; 8] = [
        SolverKind::Rek,
        SolverKind::TrekAlt,
        SolverKind::Treks,
        SolverKind::Grek,
        SolverKind::Srek,
        SolverKind::Tgrek,
        SolverKind::Tsrek,
        SolverKind::Tsreks,
    ];

    pub const CONSISTENT: [SolverKind; 5] = [
        SolverKind::Rk,
        SolverKind::Trks,
        SolverKind::Tgrk,
        SolverKind::Tsrk,
        SolverKind::Tsrks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Rek => "REK",
            SolverKind::TrekAlt => "TREK_ALT",
            SolverKind::Treks => "TREKS",
            SolverKind::Grek => "GREK",
            SolverKind::Srek => "SREK",
            SolverKind::Tgrek => "TGREK",
            SolverKind::Tsrek => "TSREK",
            SolverKind::Tsreks => "TSREKS",
            SolverKind::Rk => "RK",
            SolverKind::Trks => "TRKS",
            SolverKind::Tgrk => "TGRK",
            SolverKind::Tsrk => "TSRK",
            SolverKind::Tsrks => "TSRKS",
            SolverKind::Gproj => "GPROJ",
            SolverKind::Sproj => "SPROJ",
        }
    }

    /// Updates both `x` and `z`.
    pub fn is_extended(self) -> bool {
        Self::EXTENDED.contains(&self)
    }

    /// Updates `x` only, with `z ≡ 0`.
    pub fn is_consistent(self) -> bool {
        Self::CONSISTENT.contains(&self)
    }

    /// Updates `z` only.
    pub fn is_projection(self) -> bool {
        matches!(self, SolverKind::Gproj | SolverKind::Sproj)
    }

    /// Reads the sampling fraction from the configuration.
    pub fn uses_fraction(self) -> bool {
        matches!(
            self,
            SolverKind::Treks | SolverKind::Tsreks | SolverKind::Trks | SolverKind::Tsrks
        )
    }

    /// Consumes random numbers.
    pub fn is_randomized(self) -> bool {
        let rules = [self.row_rule(1.0), self.col_rule(1.0)];
        rules.iter().flatten().any(|r| r.is_randomized())
    }

    pub fn row_rule(self, fraction: f64) -> Option<Rule> {
        use SolverKind::*;
        Some(match self {
            Rek | Rk => Rule::NormWeighted,
            TrekAlt => Rule::NormPairSampled(1.0),
            Treks | Trks => Rule::NormPairSampled(fraction),
            Grek => Rule::Greedy,
            Srek => Rule::Argmax,
            Tgrek | Tgrk => Rule::GreedyPair,
            Tsrek | Tsrk => Rule::TopTwo,
            Tsreks | Tsrks => Rule::TopTwoSampled(fraction),
            Gproj | Sproj => return None,
        })
    }

    pub fn col_rule(self, fraction: f64) -> Option<Rule> {
        use SolverKind::*;
        Some(match self {
            Rek => Rule::NormWeighted,
            TrekAlt => Rule::NormPairSampled(1.0),
            Treks => Rule::NormPairSampled(fraction),
            Grek | Gproj => Rule::Greedy,
            Srek | Sproj => Rule::Argmax,
            Tgrek => Rule::GreedyPair,
            Tsrek => Rule::TopTwo,
            Tsreks => Rule::TopTwoSampled(fraction),
            Rk | Trks | Tgrk | Tsrk | Tsrks => return None,
        })
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = UnknownMethod;

    /// Case-insensitive; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

impl From<SolverKind> for String {
    fn from(k: SolverKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for SolverKind {
    type Error = UnknownMethod;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
