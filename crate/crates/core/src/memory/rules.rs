use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::Function;
use crate::env::Example;

/// Trigger words and POS tags gating functions during random exploration.
const TABLE: &[(Function, &[&str])] = &[
    (Function::Count, &["how", "many", "total", "number"]),
    (Function::FilterNotIn, &["not", "other", "besides"]),
    (Function::First, &["first", "top"]),
    (Function::Last, &["last", "bottom"]),
    (Function::Argmin, &["JJR", "JJS", "RBR", "RBS", "top", "first", "bottom", "last"]),
    (Function::Argmax, &["JJR", "JJS", "RBR", "RBS", "top", "first", "bottom", "last"]),
    (Function::Sum, &["all", "combine", "total"]),
    (Function::Average, &["average"]),
    (Function::Max, &["JJR", "JJS", "RBR", "RBS"]),
    (Function::Min, &["JJR", "JJS", "RBR", "RBS"]),
    (Function::Mode, &["most"]),
    (Function::Previous, &["next", "previous", "after", "before", "above", "below"]),
    (Function::Next, &["next", "previous", "after", "before", "above", "below"]),
    (Function::SameAs, &["same"]),
    (Function::Diff, &["difference", "more", "than"]),
    (Function::FilterGe, &["RBR", "JJR", "more", "than", "least", "above", "after"]),
    (Function::FilterLe, &["RBR", "JJR", "less", "than", "most", "below", "before", "under"]),
    (Function::FilterGt, &["RBR", "JJR", "more", "than", "least", "above", "after"]),
    (Function::FilterLt, &["RBR", "JJR", "less", "than", "most", "below", "before", "under"]),
];

fn is_pos_tag(t: &str) -> bool {
    t.chars().all(|c| c.is_ascii_uppercase())
}

/// Function → trigger set. Functions absent from the map are unconstrained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruningRules {
    #[serde(with = "by_name")]
    pub triggers: BTreeMap<Function, BTreeSet<String>>,
}

impl Default for PruningRules {
    fn default() -> Self {
        PruningRules {
            triggers: TABLE
                .iter()
                .map(|(f, ts)| (*f, ts.iter().map(|t| t.to_string()).collect()))
                .collect(),
        }
    }
}

impl PruningRules {
    /// Functions whose triggers are met by the question. POS-tag triggers
    /// are ignored when the example carries no tags.
    pub fn allows(&self, f: Function, example: &Example) -> bool {
        let Some(ts) = self.triggers.get(&f) else {
            return true;
        };
        ts.iter().any(|t| {
            if is_pos_tag(t) {
                example.pos_tags.iter().any(|p| p == t)
            } else {
                example.question_tokens.iter().any(|w| w == t)
            }
        })
    }
}

/// Every word or tag that appears in the trigger table.
pub fn trigger_vocabulary() -> BTreeSet<&'static str> {
    TABLE.iter().flat_map(|(_, ts)| ts.iter().copied()).collect()
}

/// Triggers present in an example: question words and POS tags that occur
/// in the trigger table.
pub fn present_triggers(question_tokens: &[String], pos_tags: &[String]) -> Vec<String> {
    let vocab = trigger_vocabulary();
    let mut out: BTreeSet<String> = BTreeSet::new();
    for w in question_tokens.iter().chain(pos_tags) {
        if vocab.contains(w.as_str()) {
            out.insert(w.clone());
        }
    }
    out.into_iter().collect()
}

mod by_name {
    use std::collections::{BTreeMap, BTreeSet};

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::dsl::Function;

    pub fn serialize<S: Serializer>(m: &BTreeMap<Function, BTreeSet<String>>, s: S) -> Result<S::Ok, S::Error> {
        let named: BTreeMap<&str, &BTreeSet<String>> = m.iter().map(|(f, t)| (f.name(), t)).collect();
        named.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Function, BTreeSet<String>>, D::Error> {
        let named = BTreeMap::<String, BTreeSet<String>>::deserialize(d)?;
        named
            .into_iter()
            .map(|(n, t)| {
                Function::from_name(&n)
                    .map(|f| (f, t))
                    .ok_or_else(|| D::Error::custom(format!("unknown function `{n}`")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::olympics_context;

    #[test]
    fn gating() {
        let rules = PruningRules::default();
        let ex = &olympics_context().example;
        // "where did the last 1st place finish occur"
        assert!(rules.allows(Function::Last, ex));
        assert!(!rules.allows(Function::Mode, ex));
        assert!(!rules.allows(Function::Count, ex));
        assert!(rules.allows(Function::Hop, ex));
        // no POS tags: JJS-only triggers cannot fire
        assert!(!rules.allows(Function::Max, ex));
        assert!(rules.allows(Function::Argmax, ex));
    }

    #[test]
    fn serde_round_trip() {
        let r = PruningRules::default();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"filter_!in\""));
        assert_eq!(serde_json::from_str::<PruningRules>(&s).unwrap(), r);
    }
}
