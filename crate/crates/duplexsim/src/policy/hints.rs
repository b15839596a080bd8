//! Hierarchical scheduling hints.
//!
//! Hints are declared as a tree of named groups, mirroring how container
//! hierarchies compose resource policy: the root carries system-wide
//! defaults, inner groups override individual fields, and resolving a path
//! yields a fully populated [`EffectiveHint`] where each field takes the
//! deepest non-absent ancestor value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PolicyError;

/// Whether duplex-aware CPU selection applies to tasks in a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplexScheduling {
    /// Always use the declared read ratio for placement.
    On,
    /// Degrade to least-loaded CPU selection.
    Off,
    /// Use the observed ratio when available, the declared one otherwise.
    Auto,
}

/// Optional per-group overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HintFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_read_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplex_scheduling: Option<DuplexScheduling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// One named group in the hierarchy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HintGroup {
    #[serde(default, flatten)]
    pub fields: HintFields,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, HintGroup>,
}

/// Fully resolved hint values for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHint {
    pub expected_read_ratio: f64,
    pub duplex_scheduling: DuplexScheduling,
    pub weight: f64,
}

impl Default for EffectiveHint {
    fn default() -> Self {
        EffectiveHint {
            expected_read_ratio: 0.5,
            duplex_scheduling: DuplexScheduling::Auto,
            weight: 1.0,
        }
    }
}

/// Hint hierarchy with guaranteed-total root defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HintTree {
    /// Root-level overrides of the built-in defaults.
    #[serde(default, flatten)]
    pub root: HintGroup,
}

impl HintTree {
    pub fn new(root: HintGroup) -> Self {
        HintTree { root }
    }

    /// Resolves a group path starting at the root. Every field takes the
    /// deepest group that sets it; the built-in defaults make resolution
    /// total. Unknown path elements are an error.
    pub fn resolve(&self, path: &[String]) -> Result<EffectiveHint, PolicyError> {
        let mut hint = EffectiveHint::default();
        let mut group = &self.root;
        apply(&mut hint, &group.fields);
        for name in path {
            group = group
                .groups
                .get(name)
                .ok_or_else(|| PolicyError::UnknownHintGroup(name.clone()))?;
            apply(&mut hint, &group.fields);
        }
        Ok(hint)
    }
}

fn apply(hint: &mut EffectiveHint, fields: &HintFields) {
    if let Some(r) = fields.expected_read_ratio {
        hint.expected_read_ratio = r;
    }
    if let Some(d) = fields.duplex_scheduling {
        hint.duplex_scheduling = d;
    }
    if let Some(w) = fields.weight {
        hint.weight = w;
    }
}

/// Free-function form of [`HintTree::resolve`].
pub fn resolve_hint(tree: &HintTree, path: &[String]) -> Result<EffectiveHint, PolicyError> {
    tree.resolve(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    fn tree_3_level() -> HintTree {
        // root { ratio 0.5 } -> mid { duplex Off } -> leaf { ratio 0.9 }
        let mut mid = HintGroup {
            fields: HintFields {
                duplex_scheduling: Some(DuplexScheduling::Off),
                ..Default::default()
            },
            ..Default::default()
        };
        mid.groups.insert(
            "leaf".into(),
            HintGroup {
                fields: HintFields {
                    expected_read_ratio: Some(0.9),
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        let mut root = HintGroup {
            fields: HintFields {
                expected_read_ratio: Some(0.5),
                ..Default::default()
            },
            ..Default::default()
        };
        root.groups.insert("mid".into(), mid);
        HintTree::new(root)
    }

    #[test]
    fn child_overrides_parent() {
        let mut root = HintGroup {
            fields: HintFields {
                expected_read_ratio: Some(0.5),
                ..Default::default()
            },
            ..Default::default()
        };
        root.groups.insert(
            "child".into(),
            HintGroup {
                fields: HintFields {
                    expected_read_ratio: Some(0.9),
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        let tree = HintTree::new(root);
        assert_eq!(tree.resolve(&path(&["child"])).unwrap().expected_read_ratio, 0.9);
        assert_eq!(tree.resolve(&[]).unwrap().expected_read_ratio, 0.5);
    }

    #[test]
    fn empty_child_inherits_everything() {
        let mut root = HintGroup {
            fields: HintFields {
                expected_read_ratio: Some(0.7),
                weight: Some(2.0),
                ..Default::default()
            },
            ..Default::default()
        };
        root.groups.insert("child".into(), HintGroup::default());
        let tree = HintTree::new(root);
        let resolved = tree.resolve(&path(&["child"])).unwrap();
        assert_eq!(resolved.expected_read_ratio, 0.7);
        assert_eq!(resolved.weight, 2.0);
        assert_eq!(resolved.duplex_scheduling, DuplexScheduling::Auto);
    }

    #[test]
    fn three_level_field_by_field_resolution() {
        // Oracle: walk field by field. Middle overrides duplex, leaf
        // overrides ratio, weight falls through to the built-in default.
        let tree = tree_3_level();
        let resolved = tree.resolve(&path(&["mid", "leaf"])).unwrap();
        assert_eq!(resolved.duplex_scheduling, DuplexScheduling::Off);
        assert_eq!(resolved.expected_read_ratio, 0.9);
        assert_eq!(resolved.weight, 1.0);
    }

    #[test]
    fn unknown_path_element_errors() {
        let tree = tree_3_level();
        assert_eq!(
            tree.resolve(&path(&["mid", "nope"])),
            Err(PolicyError::UnknownHintGroup("nope".into()))
        );
    }

    #[test]
    fn empty_tree_resolves_defaults() {
        let tree = HintTree::default();
        let resolved = tree.resolve(&[]).unwrap();
        assert_eq!(resolved, EffectiveHint::default());
    }
}
