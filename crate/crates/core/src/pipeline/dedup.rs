//! Correction loops 2 and 3: grouping duplicate names.
//!
//! The dedup model proposes groups; [`resolve_groups`] turns any proposal
//! into a total, injective alias map over exactly the input names.

use std::collections::{BTreeMap, BTreeSet};

use crate::llm::schema::DedupGroups;
use crate::llm::{Gateway, LlmRequest, ModelRole, SchemaTag};
use crate::model::{AliasKind, ProvenanceLog};

use super::prompts;

/// Raw surface name to canonical name, for one kind of entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasMap {
    pub kind: AliasKind,
    pub entries: BTreeMap<String, String>,
}

impl AliasMap {
    /// Every name is its own canonical name.
    pub fn identity(kind: AliasKind, names: &BTreeSet<String>) -> Self {
        AliasMap {
            kind,
            entries: names.iter().map(|n| (n.clone(), n.clone())).collect(),
        }
    }

    pub fn canonical(&self, raw: &str) -> Option<&str> {
        self.entries.get(raw).map(String::as_str)
    }

    /// Canonical name to its sorted member names.
    pub fn groups(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (raw, canon) in &self.entries {
            out.entry(canon.clone()).or_default().push(raw.clone());
        }
        out
    }
}

/// Representative of a group: the longest name (in characters), ties broken
/// by the lexicographically smallest.
///
/// ```
/// use ribbons_core::pipeline::dedup::canonical_name;
/// let names = ["Jane", "Jane Bennet", "Miss Bennet"].map(String::from);
/// assert_eq!(canonical_name(&names), Some("Jane Bennet"));
/// ```
pub fn canonical_name(names: &[String]) -> Option<&str> {
    names
        .iter()
        .min_by(|a, b| {
            b.chars()
                .count()
                .cmp(&a.chars().count())
                .then_with(|| a.cmp(b))
        })
        .map(String::as_str)
}

/// Enforces totality on a proposed grouping.
///
/// Names are matched after trimming. A name claimed by several groups stays
/// in the first; names the proposal invents are dropped; input names it
/// omits become singletons. Every adjustment is described in the returned notes.
pub fn resolve_groups(
    kind: AliasKind,
    input: &BTreeSet<String>,
    proposed: &[Vec<String>],
) -> (AliasMap, Vec<String>) {
    let mut notes = Vec::new();
    let mut assigned: BTreeSet<&str> = BTreeSet::new();
    let mut groups: Vec<Vec<String>> = Vec::new();
    for group in proposed {
        let mut members = Vec::new();
        for name in group {
            let name = name.trim();
            match input.get(name) {
                None => notes.push(format!("discarded invented name {name:?}")),
                Some(known) => {
                    if assigned.insert(known.as_str()) {
                        members.push(known.clone());
                    } else if !members.contains(known) {
                        notes.push(format!("{name:?} already grouped; kept its first group"));
                    }
                }
            }
        }
        if !members.is_empty() {
            groups.push(members);
        }
    }
    for name in input {
        if !assigned.contains(name.as_str()) {
            notes.push(format!("{name:?} omitted by model; kept as its own group"));
            groups.push(vec![name.clone()]);
        }
    }
    let mut entries = BTreeMap::new();
    for members in &groups {
        let canon = canonical_name(members).expect("groups are non-empty").to_string();
        for m in members {
            entries.insert(m.clone(), canon.clone());
        }
    }
    (AliasMap { kind, entries }, notes)
}

fn tag_for(kind: AliasKind) -> &'static str {
    match kind {
        AliasKind::Character => "dedup/characters",
        AliasKind::Location => "dedup/locations",
        AliasKind::Theme => "dedup/themes",
        AliasKind::Group => "dedup/groups",
    }
}

/// One dedup-role call over `names`. On gateway failure the identity map is
/// returned and the failure flagged; an empty input makes no call.
pub async fn dedup_entities(
    gateway: &Gateway,
    names: &BTreeSet<String>,
    kind: AliasKind,
) -> (AliasMap, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    let step = format!("dedup_{}", kind.as_str());
    if names.is_empty() {
        return (AliasMap::identity(kind, names), log);
    }
    let request = LlmRequest::new(tag_for(kind), SchemaTag::Dedup, ModelRole::Dedup)
        .system(prompts::dedup_system(kind))
        .user(prompts::dedup_user(names));
    match gateway.complete_as::<DedupGroups>(request).await {
        Ok((reply, _)) => {
            let (map, notes) = resolve_groups(kind, names, &reply.groups);
            for n in notes {
                log.repair(&step, n);
            }
            (map, log)
        }
        Err(e) => {
            log.flag(&step, format!("dedup call failed ({e}); every name kept canonical"));
            (AliasMap::identity(kind, names), log)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn group(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bennet_sisters_collapse_to_longest() {
        let input = set(&["Jane", "Jane Bennet", "Miss Bennet"]);
        let (map, notes) = resolve_groups(
            AliasKind::Character,
            &input,
            &[group(&["Jane", "Jane Bennet", "Miss Bennet"])],
        );
        assert!(notes.is_empty());
        for n in &input {
            assert_eq!(map.canonical(n), Some("Jane Bennet"));
        }
    }

    #[test]
    fn group_labels_merge() {
        let input = set(&["Bennet family", "family members"]);
        let (map, _) = resolve_groups(
            AliasKind::Group,
            &input,
            &[group(&["Bennet family", "family members"])],
        );
        assert_eq!(map.groups().len(), 1);
        assert_eq!(map.canonical("Bennet family"), Some("family members"));
    }

    #[test]
    fn equal_length_breaks_ties_lexicographically() {
        let names = ["Gregor", "Samsa"].map(String::from);
        assert_eq!(canonical_name(&names), Some("Gregor"));
        let names = ["Grete", "Anna"].map(String::from);
        assert_eq!(canonical_name(&names), Some("Grete"));
        let names = ["Bob", "Amy"].map(String::from);
        assert_eq!(canonical_name(&names), Some("Amy"));
    }

    #[test]
    fn omitted_name_becomes_singleton() {
        let input = set(&["Anna", "Baker"]);
        let (map, notes) = resolve_groups(AliasKind::Character, &input, &[group(&["Anna"])]);
        assert_eq!(map.canonical("Baker"), Some("Baker"));
        assert_eq!(notes.len(), 1);
        assert!(notes[0].contains("Baker"));
    }

    #[test]
    fn invented_and_duplicated_names() {
        let input = set(&["A", "B"]);
        let (map, notes) = resolve_groups(
            AliasKind::Location,
            &input,
            &[group(&["A", "Ghost"]), group(&["A", "B"])],
        );
        assert_eq!(map.canonical("A"), Some("A"));
        assert_eq!(map.canonical("B"), Some("B"));
        assert!(map.canonical("Ghost").is_none());
        assert_eq!(notes.len(), 2);
    }
}
