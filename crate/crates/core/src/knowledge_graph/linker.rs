use std::collections::HashMap;

use super::{Entity, EntityMention};
use crate::corpus::tokenize;

/// Alias dictionary keyed by token n-gram.
///
/// When two entities share an alias the one listed first in the graph wins.
#[derive(Debug, Clone, Default)]
pub struct EntityLinker {
    dictionary: HashMap<Vec<String>, usize>,
    max_len: usize,
}

impl EntityLinker {
    pub fn new(entities: &[Entity]) -> Self {
        let mut dictionary = HashMap::new();
        let mut max_len = 0;
        for (i, e) in entities.iter().enumerate() {
            for alias in &e.aliases {
                let key = tokenize(alias, usize::MAX);
                if key.is_empty() {
                    continue;
                }
                max_len = max_len.max(key.len());
                dictionary.entry(key).or_insert(i);
            }
        }
        EntityLinker { dictionary, max_len }
    }

    /// Entity index of an exact alias match for `span`.
    pub fn lookup(&self, span: &[String]) -> Option<usize> {
        self.dictionary.get(span).copied()
    }

    /// Scans left to right, taking the longest alias that starts at each
    /// position and skipping past it. Spans come out sorted and disjoint.
    pub fn link(&self, tokens: &[String], entities: &[Entity]) -> Vec<EntityMention> {
        let mut mentions = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let longest = self.max_len.min(tokens.len() - pos);
            let hit = (1..=longest)
                .rev()
                .find_map(|len| self.lookup(&tokens[pos..pos + len]).map(|e| (e, len)));
            match hit {
                Some((e, len)) => {
                    mentions.push(EntityMention { entity_id: entities[e].id.clone(), start: pos, end: pos + len });
                    pos += len;
                }
                None => pos += 1,
            }
        }
        mentions
    }
}
