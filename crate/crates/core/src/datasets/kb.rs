//! Local knowledge base standing in for live entity lookups.
//!
//! File format: one JSON object per line,
//! `{"entity": "...", "fields": {"name": ["value", ...]}, "popularity": 93}`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{ConstraintDraft, DatasetError, PromptTemplate, QueryPrompt};

#[derive(Deserialize)]
struct KbLine {
    entity: String,
    fields: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    popularity: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    entities: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    popularity: BTreeMap<String, u64>,
    normalized: HashMap<String, String>,
}

pub(crate) fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        entity: impl Into<String>,
        fields: BTreeMap<String, Vec<String>>,
        popularity: Option<u64>,
    ) -> Result<(), DatasetError> {
        let entity = entity.into();
        if let Some((name, _)) = fields.iter().find(|(_, v)| v.is_empty()) {
            return Err(DatasetError::Invalid(format!("entity {entity}: field {name} has no accepted values")));
        }
        if let Some(p) = popularity {
            self.popularity.insert(entity.clone(), p);
        }
        self.normalized.insert(normalize(&entity), entity.clone());
        self.entities.insert(entity, fields);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
        let mut kb = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: KbLine = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            kb.insert(parsed.entity, parsed.fields, parsed.popularity)?;
        }
        Ok(kb)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entity keys in sorted order.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    /// Looks an entity up by exact key, then case- and whitespace-insensitively.
    pub fn fields(&self, entity: &str) -> Option<&BTreeMap<String, Vec<String>>> {
        self.entities
            .get(entity)
            .or_else(|| self.normalized.get(&normalize(entity)).and_then(|k| self.entities.get(k)))
    }

    pub fn values(&self, entity: &str, field: &str) -> Option<&[String]> {
        self.fields(entity)?.get(field).map(Vec::as_slice)
    }

    pub fn popularity(&self, entity: &str) -> Option<u64> {
        self.popularity.get(entity).copied()
    }
}

#[derive(Clone, Debug, Default)]
pub struct SingleConstraintOptions {
    /// Skip entities whose popularity is known and below this count.
    pub min_popularity: Option<u64>,
    /// Prefix for generated prompt ids.
    pub id_prefix: String,
}

/// One prompt per entity carrying `field`; the entity name fills the
/// template's single placeholder and the field's values become the target.
pub fn build_single_constraint_dataset(
    kb: &KnowledgeBase,
    template: &PromptTemplate,
    field: &str,
    opts: &SingleConstraintOptions,
) -> Result<Vec<QueryPrompt>, DatasetError> {
    if template.arity() != 1 {
        return Err(DatasetError::Invalid(format!("template has {} placeholders, expected 1", template.arity())));
    }
    let mut out = Vec::new();
    for entity in kb.entities() {
        let Some(values) = kb.values(entity, field) else { continue };
        let popularity = kb.popularity(entity);
        if let (Some(min), Some(p)) = (opts.min_popularity, popularity) {
            if p < min {
                continue;
            }
        }
        let (text, ranges) = template.render(&[entity])?;
        out.push(QueryPrompt {
            id: format!("{}{}", opts.id_prefix, out.len()),
            text,
            constraints: vec![ConstraintDraft {
                name: template.names()[0].clone(),
                verifier: template.verifiers()[0],
                target: values.join("|"),
                char_range: ranges[0].clone(),
            }],
            popularity,
            constrainedness: None,
        });
    }
    if out.is_empty() {
        return Err(DatasetError::Empty(format!("no entity carries field {field}")));
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::trace::VerifierKind;

    /// Players sampled from published popularity buckets.
    pub(crate) fn players() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        let rows = [
            ("Michael Jordan", Some("1963"), 120),
            ("Kobe Bryant", Some("1978"), 110),
            ("Gur Shelef", Some("1978"), 6),
            ("Joakim Noah", None, 35),
        ];
        for (name, year, pop) in rows {
            let mut fields = BTreeMap::new();
            if let Some(y) = year {
                fields.insert("birth_year".to_string(), vec![y.to_string()]);
            }
            fields.insert("team".to_string(), vec!["somewhere".to_string()]);
            kb.insert(name, fields, Some(pop)).unwrap();
        }
        kb
    }

    fn template() -> PromptTemplate {
        PromptTemplate::new(
            "User: Tell me the year the basketball player {player} was born in.\nAssistant: The player was born in",
            &[("player", VerifierKind::ExactMatch)],
        )
        .unwrap()
    }

    #[test]
    fn one_prompt_per_entity_with_field() {
        let ds = build_single_constraint_dataset(&players(), &template(), "birth_year", &Default::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.iter().all(|q| !q.text.contains("Joakim")));
        let mj = ds.iter().find(|q| q.text.contains("Michael Jordan")).unwrap();
        assert_eq!(mj.constraint_text(0), "Michael Jordan");
        assert_eq!(mj.constraints[0].target, "1963");
        let pop = mj.popularity.unwrap();
        assert!((90..=140).contains(&pop));
    }

    #[test]
    fn popularity_filter_and_empty_result() {
        let opts = SingleConstraintOptions { min_popularity: Some(15), ..Default::default() };
        let ds = build_single_constraint_dataset(&players(), &template(), "birth_year", &opts).unwrap();
        assert_eq!(ds.len(), 2);
        let err = build_single_constraint_dataset(&players(), &template(), "height", &Default::default());
        assert!(matches!(err, Err(DatasetError::Empty(_))));
    }

    #[test]
    fn load_from_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        fs::write(
            &path,
            "{\"entity\":\"The Old Man and the Sea\",\"fields\":{\"author\":[\"Ernest Hemingway\"],\"year\":[\"1952\"]},\"popularity\":80}\n\n",
        )
        .unwrap();
        let kb = KnowledgeBase::load(&path).unwrap();
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.values("the old man and the sea ", "year").unwrap(), ["1952"]);
        fs::write(&path, "{\"entity\":\"x\",\"fields\":{\"a\":[]}}\n").unwrap();
        assert!(KnowledgeBase::load(&path).is_err());
        fs::write(&path, "nope\n").unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(DatasetError::Parse { line: 1, .. })));
    }
}
