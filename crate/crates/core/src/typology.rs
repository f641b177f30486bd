//! Error typology: a tree of categories, some of which carry a code and can be
//! used as labels.
//!
//! Typologies are data. A typology document is JSON with a title and a list of
//! top-level nodes:
//!
//! ```json
//! {
//!   "name": "Error Typology",
//!   "nodes": [
//!     { "name": "Content transfer", "prompt_label": "Transfert-contenu",
//!       "children": [
//!         { "name": "Omission", "code": "TR-OM", "definition": "..." }
//!       ] }
//!   ]
//! }
//! ```
//!
//! Node fields: `name` (required), `code`, `definition`, `aliases` (alternate
//! spellings of the code), `prompt_label` (label used when rendering the
//! typology into a prompt, defaults to `name`), `children`. A node may instead
//! declare `id` and `parent` to describe the tree as a flat list; both forms
//! can be mixed.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled default typology document.
pub const DEFAULT_TYPOLOGY_JSON: &str = include_str!("../data/typology.json");

#[derive(Debug, Error)]
pub enum TypologyError {
    #[error("duplicate code {0}")]
    DuplicateCode(String),
    #[error("malformed node: {0}")]
    MalformedNode(String),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("cannot read typology: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse typology: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Index of a node inside a [`Typology`].
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCategory {
    pub id: NodeId,
    pub code: Option<String>,
    pub name: String,
    pub definition: String,
    pub prompt_label: Option<String>,
    pub aliases: Vec<String>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub selectable: bool,
}

impl ErrorCategory {
    /// Label shown in prompts.
    pub fn display_label(&self) -> &str {
        self.prompt_label.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone)]
pub struct Typology {
    title: String,
    nodes: Vec<ErrorCategory>,
    roots: Vec<NodeId>,
    code_index: HashMap<String, NodeId>,
    alias_table: HashMap<String, String>,
}

/// Serialized form of a node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeDocument>,
}

/// Serialized form of a whole typology.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypologyDocument {
    #[serde(default)]
    pub name: String,
    pub nodes: Vec<NodeDocument>,
}

/// Normalizes a label or code: surrounding whitespace stripped, uppercase,
/// typographic dashes mapped to `-`.
pub fn normalize_code(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2212}' => '-',
            _ => c,
        })
        .flat_map(char::to_uppercase)
        .collect()
}

/// Reads and validates a typology document from disk.
pub fn load_typology(path: impl AsRef<Path>) -> Result<Typology, TypologyError> {
    let text = std::fs::read_to_string(path)?;
    Typology::from_json(&text)
}

struct FlatNode {
    doc: NodeDocument,
    key: Option<String>,
    parent_key: Option<String>,
    nested_parent: Option<usize>,
}

impl Typology {
    /// The bundled default typology.
    pub fn bundled() -> Typology {
        Typology::from_json(DEFAULT_TYPOLOGY_JSON).expect("bundled typology is valid")
    }

    pub fn from_json(text: &str) -> Result<Typology, TypologyError> {
        let doc: TypologyDocument = serde_json::from_str(text)?;
        Typology::from_document(doc)
    }

    pub fn from_document(doc: TypologyDocument) -> Result<Typology, TypologyError> {
        let mut flat: Vec<FlatNode> = Vec::new();
        fn flatten(node: NodeDocument, nested_parent: Option<usize>, out: &mut Vec<FlatNode>) {
            let mut node = node;
            let children = std::mem::take(&mut node.children);
            let key = node.id.clone();
            let parent_key = node.parent.take();
            let idx = out.len();
            out.push(FlatNode {
                doc: node,
                key,
                parent_key,
                nested_parent,
            });
            for child in children {
                flatten(child, Some(idx), out);
            }
        }
        for node in doc.nodes {
            flatten(node, None, &mut flat);
        }

        let mut has_children = vec![false; flat.len()];
        for f in &flat {
            if let Some(p) = f.nested_parent {
                has_children[p] = true;
            }
        }

        // Keys for flat-form parent references: explicit id, else code, else name.
        let mut by_key: HashMap<String, usize> = HashMap::new();
        for (i, f) in flat.iter().enumerate() {
            let key = f
                .key
                .clone()
                .or_else(|| f.doc.code.as_deref().map(normalize_code))
                .unwrap_or_else(|| f.doc.name.clone());
            if f.key.is_some() && by_key.contains_key(&key) {
                return Err(TypologyError::MalformedTree(format!(
                    "duplicate node id {key:?}"
                )));
            }
            by_key.entry(key).or_insert(i);
        }

        let mut parents: Vec<Option<usize>> = Vec::with_capacity(flat.len());
        for f in &flat {
            let parent = match (&f.parent_key, f.nested_parent) {
                (Some(_), Some(_)) => {
                    return Err(TypologyError::MalformedTree(format!(
                        "node {:?} is nested and also declares a parent",
                        f.doc.name
                    )))
                }
                (Some(pk), None) => Some(*by_key.get(pk).ok_or_else(|| {
                    TypologyError::MalformedTree(format!("unknown parent {pk:?}"))
                })?),
                (None, nested) => nested,
            };
            parents.push(parent);
        }
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                has_children[*p] = true;
                if *p == i {
                    return Err(TypologyError::MalformedTree(format!(
                        "node {:?} is its own parent",
                        flat[i].doc.name
                    )));
                }
            }
        }
        // Every node must reach a root by following parents.
        for start in 0..flat.len() {
            let mut seen = HashSet::new();
            let mut cur = Some(start);
            while let Some(c) = cur {
                if !seen.insert(c) {
                    return Err(TypologyError::MalformedTree(format!(
                        "cycle through node {:?}",
                        flat[c].doc.name
                    )));
                }
                cur = parents[c];
            }
        }

        for (i, f) in flat.iter().enumerate() {
            if f.doc.name.trim().is_empty() {
                let what = if has_children[i] {
                    "node with children has no name".to_string()
                } else if let Some(code) = &f.doc.code {
                    format!("node {code} has no name")
                } else {
                    "node has neither name nor code".to_string()
                };
                return Err(TypologyError::MalformedNode(what));
            }
            if let Some(code) = &f.doc.code {
                if normalize_code(code).is_empty() {
                    return Err(TypologyError::MalformedNode(format!(
                        "node {:?} has an empty code",
                        f.doc.name
                    )));
                }
            }
        }

        let mut nodes: Vec<ErrorCategory> = flat
            .iter()
            .enumerate()
            .map(|(i, f)| ErrorCategory {
                id: i,
                code: f.doc.code.as_deref().map(|c| c.trim().to_string()),
                name: f.doc.name.clone(),
                definition: f.doc.definition.clone().unwrap_or_default(),
                prompt_label: f.doc.prompt_label.clone(),
                aliases: f.doc.aliases.clone(),
                parent: parents[i],
                children: Vec::new(),
                selectable: f.doc.code.is_some(),
            })
            .collect();
        let mut roots = Vec::new();
        for i in 0..nodes.len() {
            match parents[i] {
                Some(p) => nodes[p].children.push(i),
                None => roots.push(i),
            }
        }

        let mut code_index = HashMap::new();
        for node in &nodes {
            if let Some(code) = &node.code {
                if code_index.insert(normalize_code(code), node.id).is_some() {
                    return Err(TypologyError::DuplicateCode(code.clone()));
                }
            }
        }
        let mut alias_table = HashMap::new();
        for node in &nodes {
            let Some(code) = &node.code else {
                if !node.aliases.is_empty() {
                    return Err(TypologyError::MalformedNode(format!(
                        "node {:?} has aliases but no code",
                        node.name
                    )));
                }
                continue;
            };
            for alias in &node.aliases {
                let key = normalize_code(alias);
                if code_index.contains_key(&key) || alias_table.contains_key(&key) {
                    return Err(TypologyError::DuplicateCode(alias.clone()));
                }
                alias_table.insert(key, code.clone());
            }
        }

        Ok(Typology {
            title: doc.name,
            nodes,
            roots,
            code_index,
            alias_table,
        })
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn roots(&self) -> impl Iterator<Item = &ErrorCategory> {
        self.roots.iter().map(|&i| &self.nodes[i])
    }

    pub fn node(&self, id: NodeId) -> &ErrorCategory {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[ErrorCategory] {
        &self.nodes
    }

    pub fn children<'a>(
        &'a self,
        node: &'a ErrorCategory,
    ) -> impl Iterator<Item = &'a ErrorCategory> {
        node.children.iter().map(|&i| &self.nodes[i])
    }

    /// Selectable nodes in document order.
    pub fn selectable(&self) -> impl Iterator<Item = &ErrorCategory> {
        self.nodes.iter().filter(|n| n.selectable)
    }

    /// Top-level category that contains `node`.
    pub fn top_level_of(&self, node: &ErrorCategory) -> &ErrorCategory {
        let mut cur = &self.nodes[node.id];
        while let Some(p) = cur.parent {
            cur = &self.nodes[p];
        }
        cur
    }

    /// Resolves a raw label to its category. Matches the code after
    /// normalization, then the alias table.
    pub fn resolve_label(&self, raw: &str) -> Result<&ErrorCategory, TypologyError> {
        let key = normalize_code(raw);
        if key.is_empty() {
            return Err(TypologyError::UnknownLabel(raw.to_string()));
        }
        let id = self.code_index.get(&key).copied().or_else(|| {
            self.alias_table
                .get(&key)
                .and_then(|canon| self.code_index.get(&normalize_code(canon)).copied())
        });
        id.map(|i| &self.nodes[i])
            .ok_or_else(|| TypologyError::UnknownLabel(raw.to_string()))
    }

    /// Canonical code for a raw label.
    pub fn canonical_code(&self, raw: &str) -> Result<&str, TypologyError> {
        let node = self.resolve_label(raw)?;
        Ok(node.code.as_deref().expect("indexed nodes carry a code"))
    }

    /// Serializes back to the nested document form.
    pub fn to_document(&self) -> TypologyDocument {
        fn build(t: &Typology, id: NodeId) -> NodeDocument {
            let n = &t.nodes[id];
            NodeDocument {
                id: None,
                parent: None,
                name: n.name.clone(),
                code: n.code.clone(),
                prompt_label: n.prompt_label.clone(),
                aliases: n.aliases.clone(),
                definition: (!n.definition.is_empty()).then(|| n.definition.clone()),
                children: n.children.iter().map(|&c| build(t, c)).collect(),
            }
        }
        TypologyDocument {
            name: self.title.clone(),
            nodes: self.roots.iter().map(|&r| build(self, r)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("typology serializes")
    }

    /// Renders the typology as a numbered prompt block. Each entry is
    /// `<number>\t<label>` with `_<CODE>` appended for coded nodes; uncoded
    /// nodes are marked as not to be used. With `include_definitions`, each
    /// non-empty definition follows its entry on a `* ` line.
    pub fn render_prompt_block(&self, include_definitions: bool) -> String {
        let mut out = String::new();
        for (i, &root) in self.roots.iter().enumerate() {
            self.render_node(
                root,
                &format!("{}.", i + 1),
                true,
                include_definitions,
                &mut out,
            );
        }
        out
    }

    fn render_node(
        &self,
        id: NodeId,
        number: &str,
        top_level: bool,
        include_definitions: bool,
        out: &mut String,
    ) {
        let node = &self.nodes[id];
        let label = node.display_label();
        match &node.code {
            Some(code) => {
                let _ = writeln!(out, "{number}\t{label}_{code}");
            }
            None if top_level => {
                let _ = writeln!(out, "{number}\t{label} (GRANDE CATÉGORIE, NE PAS UTILISER)");
            }
            None => {
                let _ = writeln!(out, "{number}\t{label} (NE PAS UTILISER)");
            }
        }
        if include_definitions && !node.definition.trim().is_empty() {
            let _ = writeln!(out, "* {}", node.definition.trim());
        }
        for (j, &child) in node.children.iter().enumerate() {
            self.render_node(
                child,
                &format!("{number}{}.", j + 1),
                false,
                include_definitions,
                out,
            );
        }
    }
}

impl PartialEq for Typology {
    fn eq(&self, other: &Self) -> bool {
        self.to_document() == other.to_document()
    }
}

/// Free-function form of [`Typology::render_prompt_block`].
pub fn render_typology_prompt_block(typology: &Typology, include_definitions: bool) -> String {
    typology.render_prompt_block(include_definitions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Typology {
        Typology::from_json(r#"{"name":"t","nodes":[{"name":"Root","children":[{"name":"Omission","code":"TR-OM","definition":"missing idea"}]}]}"#).unwrap()
    }

    #[test]
    fn bundled_matches_figure_counts() {
        let t = Typology::bundled();
        let tops: Vec<_> = t.roots().map(|r| r.name.as_str()).collect();
        assert_eq!(tops, ["Content transfer", "Language", "Tools"]);
        assert!(t.roots().all(|r| !r.selectable && r.code.is_none()));
        let per_top: Vec<usize> = t
            .roots()
            .map(|r| {
                t.selectable()
                    .filter(|n| t.top_level_of(n).id == r.id)
                    .count()
            })
            .collect();
        assert_eq!(per_top, [9, 29, 4]);
        assert_eq!(t.selectable().count(), 42);

        let terminology = t
            .nodes()
            .iter()
            .find(|n| n.name == "Terminology-and-lexis")
            .unwrap();
        fn coded_below(t: &Typology, n: &ErrorCategory) -> usize {
            t.children(n)
                .map(|c| usize::from(c.selectable) + coded_below(t, c))
                .sum()
        }
        assert_eq!(coded_below(&t, terminology), 10);
    }

    #[test]
    fn bundled_contains_terminology_node() {
        let t = Typology::bundled();
        let n = t.resolve_label("LA-TL-INS").unwrap();
        assert_eq!(n.name, "Incorrect-choice-terminology");
        assert_eq!(t.node(n.parent.unwrap()).name, "Terminology-and-lexis");
    }

    #[test]
    fn minimal_tree_has_one_selectable() {
        assert_eq!(minimal().selectable().count(), 1);
    }

    #[test]
    fn duplicate_code_rejected() {
        let err = Typology::from_json(r#"{"nodes":[{"name":"R","children":[{"name":"a","code":"TR-OM"},{"name":"b","code":"tr-om"}]}]}"#).unwrap_err();
        assert!(matches!(err, TypologyError::DuplicateCode(c) if c == "tr-om"));
    }

    #[test]
    fn nameless_parent_is_malformed() {
        let err = Typology::from_json(r#"{"nodes":[{"children":[{"name":"a","code":"X"}]}]}"#)
            .unwrap_err();
        assert!(matches!(err, TypologyError::MalformedNode(_)));
    }

    #[test]
    fn flat_cycle_is_malformed_tree() {
        let err = Typology::from_json(
            r#"{"nodes":[{"id":"a","parent":"b","name":"A"},{"id":"b","parent":"a","name":"B"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, TypologyError::MalformedTree(_)), "{err}");
    }

    #[test]
    fn flat_form_builds_tree() {
        let t = Typology::from_json(
            r#"{"nodes":[{"id":"root","name":"Root"},{"parent":"root","name":"Child","code":"C-1"}]}"#,
        )
        .unwrap();
        let root = t.roots().next().unwrap();
        assert_eq!(
            t.children(root).next().unwrap().code.as_deref(),
            Some("C-1")
        );
    }

    #[test]
    fn resolve_normalizes_and_aliases() {
        let t = Typology::bundled();
        let a = t.resolve_label("LA-TL-INS").unwrap().id;
        assert_eq!(t.resolve_label(" la-tl-ins ").unwrap().id, a);
        assert_eq!(t.resolve_label("LA–TL–INS").unwrap().id, a);
        assert_eq!(t.canonical_code("TR-TI-TF").unwrap(), "TI-TF");
        assert_eq!(t.canonical_code("ti-tf").unwrap(), "TI-TF");
        assert!(
            matches!(t.resolve_label("ZZ-QQ"), Err(TypologyError::UnknownLabel(r)) if r == "ZZ-QQ")
        );
        assert!(t.resolve_label("  ").is_err());
    }

    #[test]
    fn render_long_has_definitions() {
        let t = Typology::bundled();
        let long = t.render_prompt_block(true);
        assert!(long.starts_with("1.\tTransfert-contenu (GRANDE CATÉGORIE, NE PAS UTILISER)\n1.1.\tOmission_TR-OM\n* Une omission se produit"));
        assert!(long.contains("1.2.\tRajout_TR-AD\n* À l’instar"));
        let short = t.render_prompt_block(false);
        assert!(short.contains("1.1.\tOmission_TR-OM\n1.2.\tRajout_TR-AD\n"));
        assert!(!short.contains("* "));
        assert!(short.contains("2.8.9.2.\tDifferent-abbreviations-in-translation_LA-TL-TI-DA"));
    }

    #[test]
    fn render_single_node() {
        let t = Typology::from_json(
            r#"{"nodes":[{"name":"Omission","code":"TR-OM","definition":"d"}]}"#,
        )
        .unwrap();
        assert_eq!(t.render_prompt_block(true), "1.\tOmission_TR-OM\n* d\n");
    }

    #[test]
    fn json_round_trip() {
        let t = Typology::bundled();
        let again = Typology::from_json(&t.to_json()).unwrap();
        assert_eq!(t, again);
        assert_eq!(again.selectable().count(), 42);
    }
}
