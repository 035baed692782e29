use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// How routes are partitioned before their scores are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GroupingMode {
    /// All routes in one cell.
    #[default]
    Global,
    /// One cell per first-hop neighbor (sub-tree of the sampling tree).
    Vertical,
    /// One cell per depth.
    Horizontal,
    /// No comparison: every route gets `1/m`.
    Base,
}

impl GroupingMode {
    pub const ALL: [GroupingMode; 4] = [
        GroupingMode::Global,
        GroupingMode::Vertical,
        GroupingMode::Horizontal,
        GroupingMode::Base,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupingMode::Global => "global",
            GroupingMode::Vertical => "vertical",
            GroupingMode::Horizontal => "horizontal",
            GroupingMode::Base => "base",
        }
    }
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "global" | "glo" => Ok(GroupingMode::Global),
            "vertical" | "ver" => Ok(GroupingMode::Vertical),
            "horizontal" | "hor" => Ok(GroupingMode::Horizontal),
            "base" => Ok(GroupingMode::Base),
            _ => Err(Error::Config(format!("unknown grouping mode {s:?}"))),
        }
    }
}

/// Which route elements the selector may attend to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AblationMask {
    /// Root user or item (U/V).
    pub user_item: bool,
    /// Intermediate nodes (H).
    pub head: bool,
    /// Relations (R).
    pub relation: bool,
    /// Terminal node (T).
    pub tail: bool,
}

impl Default for AblationMask {
    fn default() -> Self {
        AblationMask::FULL
    }
}

impl AblationMask {
    pub const FULL: AblationMask = AblationMask {
        user_item: true,
        head: true,
        relation: true,
        tail: true,
    };

    pub fn from_bits(bits: u8) -> Option<Self> {
        let m = AblationMask {
            user_item: bits & 1 != 0,
            head: bits & 2 != 0,
            relation: bits & 4 != 0,
            tail: bits & 8 != 0,
        };
        m.is_valid().then_some(m)
    }

    pub fn bits(self) -> u8 {
        u8::from(self.user_item)
            | u8::from(self.head) << 1
            | u8::from(self.relation) << 2
            | u8::from(self.tail) << 3
    }

    /// All 15 masks with at least one flag set.
    pub fn all() -> impl Iterator<Item = AblationMask> {
        (1u8..16).filter_map(AblationMask::from_bits)
    }

    pub fn is_valid(self) -> bool {
        self.user_item || self.head || self.relation || self.tail
    }
}

impl fmt::Display for AblationMask {
    /// Letters of the retained components, e.g. `UHRT` or `UT`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, c) in [
            (self.user_item, 'U'),
            (self.head, 'H'),
            (self.relation, 'R'),
            (self.tail, 'T'),
        ] {
            if on {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for AblationMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let mut m = AblationMask {
            user_item: false,
            head: false,
            relation: false,
            tail: false,
        };
        for c in s.chars() {
            match c.to_ascii_uppercase() {
                'U' | 'V' => m.user_item = true,
                'H' => m.head = true,
                'R' => m.relation = true,
                'T' => m.tail = true,
                _ => return Err(Error::Config(format!("bad ablation mask {s:?}; use letters from UHRT"))),
            }
        }
        if !m.is_valid() {
            return Err(Error::Config("ablation mask must keep at least one component".into()));
        }
        Ok(m)
    }
}

/// Score normalization used inside the selector and the evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Softmax,
    /// `score / Σ score`; falls back to uniform when the sum is zero.
    RawRatio,
}

/// What the evaluator's weights multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// The per-route selected feature `e_c`.
    #[default]
    SelectedFeature,
    /// The embedding of the route's terminal node.
    TerminalEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelConfig {
    pub grouping: GroupingMode,
    pub mask: AblationMask,
    pub normalization: Normalization,
    pub aggregation: Aggregation,
}
