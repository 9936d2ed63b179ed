use std::fmt;

/// Strong Kleene truth value, ordered `False < Unknown < True`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TruthValue {
    False,
    Unknown,
    True,
}

impl TruthValue {
    pub const ALL: [TruthValue; 3] = [TruthValue::False, TruthValue::Unknown, TruthValue::True];

    pub fn and(self, other: TruthValue) -> TruthValue {
        self.min(other)
    }

    pub fn or(self, other: TruthValue) -> TruthValue {
        self.max(other)
    }

    /// Conjunction of many; `True` when empty.
    pub fn all(values: impl IntoIterator<Item = TruthValue>) -> TruthValue {
        values.into_iter().fold(TruthValue::True, TruthValue::and)
    }

    /// Disjunction of many; `False` when empty.
    pub fn any(values: impl IntoIterator<Item = TruthValue>) -> TruthValue {
        values.into_iter().fold(TruthValue::False, TruthValue::or)
    }

    /// Human-facing verdict label.
    pub fn verdict(self) -> &'static str {
        match self {
            TruthValue::True => "Applies",
            TruthValue::False => "Does not apply",
            TruthValue::Unknown => "Insufficient data",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TruthValue::True => "true",
            TruthValue::False => "false",
            TruthValue::Unknown => "unknown",
        }
    }
}

impl std::ops::Not for TruthValue {
    type Output = TruthValue;

    fn not(self) -> TruthValue {
        match self {
            TruthValue::False => TruthValue::True,
            TruthValue::Unknown => TruthValue::Unknown,
            TruthValue::True => TruthValue::False,
        }
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl serde::Serialize for TruthValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}
