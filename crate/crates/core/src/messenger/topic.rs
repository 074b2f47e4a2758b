use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopicError {
    #[error("topic {0:?} must have exactly three non-empty segments")]
    Shape(String),
    #[error("publication topic {0} contains a wildcard")]
    Wildcard(Topic),
}

/// Three dot-separated segments, each a literal or `*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Topic([String; 3]);

impl Topic {
    pub fn new(a: impl Into<String>, b: impl Into<String>, c: impl Into<String>) -> Result<Self, TopicError> {
        format!("{}.{}.{}", a.into(), b.into(), c.into()).parse()
    }

    pub fn segments(&self) -> &[String; 3] {
        &self.0
    }

    pub fn has_wildcard(&self) -> bool {
        self.0.iter().any(|s| s == WILDCARD)
    }

    /// Whether this pattern matches the concrete `topic`.
    pub fn matches(&self, topic: &Topic) -> bool {
        self.0.iter().zip(topic.0.iter()).all(|(p, t)| p == WILDCARD || p == t)
    }

    pub fn ensure_concrete(&self) -> Result<(), TopicError> {
        if self.has_wildcard() {
            Err(TopicError::Wildcard(self.clone()))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Topic {
    type Err = TopicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        let ok = parts.len() == 3
            && parts
                .iter()
                .all(|p| !p.is_empty() && (*p == WILDCARD || (!p.contains('*') && !p.contains(char::is_whitespace))));
        if !ok {
            return Err(TopicError::Shape(s.to_string()));
        }
        Ok(Topic([parts[0].to_string(), parts[1].to_string(), parts[2].to_string()]))
    }
}

impl TryFrom<String> for Topic {
    type Error = TopicError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Topic> for String {
    fn from(t: Topic) -> String {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Topic {
        s.parse().unwrap()
    }

    #[test]
    fn per_segment_matching() {
        assert!(t("A.*.*").matches(&t("A.reserve.request")));
        assert!(!t("A.*.*").matches(&t("B.reserve.request")));
        assert!(t("monitoring.*.*").matches(&t("monitoring.B.bandwidth")));
        assert!(t("general.*.*").matches(&t("general.leave.A")));
    }

    #[test]
    fn shape_is_enforced() {
        assert!("a.b".parse::<Topic>().is_err());
        assert!("a.b.c.d".parse::<Topic>().is_err());
        assert!("a..c".parse::<Topic>().is_err());
        assert!("a.b*.c".parse::<Topic>().is_err());
        assert!(t("a.*.c").ensure_concrete().is_err());
        assert!(t("a.b.c").ensure_concrete().is_ok());
    }

    proptest! {
        #[test]
        fn matching_is_segmentwise(
            p in prop::array::uniform3(prop_oneof![Just("*".to_string()), "[a-c]"]),
            c in prop::array::uniform3("[a-c]"),
        ) {
            let pat = Topic::new(p[0].clone(), p[1].clone(), p[2].clone()).unwrap();
            let top = Topic::new(c[0].clone(), c[1].clone(), c[2].clone()).unwrap();
            let oracle = (0..3).all(|i| p[i] == "*" || p[i] == c[i]);
            prop_assert_eq!(pat.matches(&top), oracle);
        }
    }
}
