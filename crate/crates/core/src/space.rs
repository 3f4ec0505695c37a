//! Block spaces: ordered, named finite-dimensional slots composing a
//! truncated Hilbert space. The `h_slots` subset records which slots
//! jointly carry the original space H.

use crate::error::{DilationError, Result};

/// One named slot of a block space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub dim: usize,
}

impl Slot {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Slot { name: name.into(), dim }
    }
}

/// Ordered list of slots plus the subset embedding the original space.
///
/// Auxiliary spaces (pure tails) may carry an empty `h_slots`; spaces
/// meant to be compressed back to H must name at least one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpace {
    slots: Vec<Slot>,
    h_slots: Vec<String>,
}

impl BlockSpace {
    pub fn new(slots: Vec<Slot>, h_slots: Vec<String>) -> Result<Self> {
        if slots.is_empty() || slots.iter().map(|s| s.dim).sum::<usize>() == 0 {
            return Err(DilationError::BadDimension(
                "block space needs positive total dimension".into(),
            ));
        }
        for (i, s) in slots.iter().enumerate() {
            if s.dim == 0 {
                return Err(DilationError::BadDimension(format!(
                    "slot '{}' has dimension 0",
                    s.name
                )));
            }
            if slots[..i].iter().any(|t| t.name == s.name) {
                return Err(DilationError::InconsistentDimensions(format!(
                    "duplicate slot name '{}'",
                    s.name
                )));
            }
        }
        for h in &h_slots {
            if !slots.iter().any(|s| &s.name == h) {
                return Err(DilationError::InconsistentDimensions(format!(
                    "h slot '{h}' not present in the slot list"
                )));
            }
        }
        Ok(BlockSpace { slots, h_slots })
    }

    /// Space with a single slot named "H" carrying all of H.
    pub fn h_only(dim: usize) -> Result<Self> {
        Self::new(vec![Slot::new("H", dim)], vec!["H".to_string()])
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn h_slots(&self) -> &[String] {
        &self.h_slots
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn total_dim(&self) -> usize {
        self.slots.iter().map(|s| s.dim).sum()
    }

    /// Offset of slot k in coordinates.
    pub fn offset(&self, k: usize) -> usize {
        self.slots[..k].iter().map(|s| s.dim).sum()
    }

    /// Total dimension of the first `k` slots.
    pub fn prefix_dim(&self, k: usize) -> usize {
        self.slots[..k.min(self.slots.len())].iter().map(|s| s.dim).sum()
    }

    /// Slot index containing coordinate `i`.
    pub fn slot_of(&self, i: usize) -> usize {
        let mut acc = 0;
        for (k, s) in self.slots.iter().enumerate() {
            acc += s.dim;
            if i < acc {
                return k;
            }
        }
        panic!("coordinate {i} outside space of dimension {}", self.total_dim());
    }

    /// Coordinate indices of the H embedding, in slot order.
    pub fn h_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (k, s) in self.slots.iter().enumerate() {
            if self.h_slots.contains(&s.name) {
                let off = self.offset(k);
                out.extend(off..off + s.dim);
            }
        }
        out
    }

    /// Slot indices of the H embedding.
    pub fn h_slot_indices(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| self.h_slots.contains(&s.name))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn h_dim(&self) -> usize {
        self.h_indices().len()
    }

    /// Concatenate spaces, uniquifying colliding slot names with a
    /// summand suffix. H slots of every summand are kept.
    pub fn concat(parts: &[&BlockSpace]) -> Result<BlockSpace> {
        let mut slots = Vec::new();
        let mut h_slots = Vec::new();
        for (idx, p) in parts.iter().enumerate() {
            for s in &p.slots {
                let mut name = s.name.clone();
                if slots.iter().any(|t: &Slot| t.name == name) {
                    name = format!("{}+{}", s.name, idx);
                }
                if p.h_slots.contains(&s.name) {
                    h_slots.push(name.clone());
                }
                slots.push(Slot::new(name, s.dim));
            }
        }
        BlockSpace::new(slots, h_slots)
    }

    /// Uniform chain: `count` slots of equal dimension named by prefix,
    /// with slot 0 optionally carrying H.
    pub fn chain(prefix: &str, dim: usize, count: usize, first_is_h: bool) -> Result<BlockSpace> {
        let slots: Vec<Slot> = (0..count)
            .map(|k| Slot::new(format!("{prefix}{k}"), dim))
            .collect();
        let h = if first_is_h {
            vec![slots[0].name.clone()]
        } else {
            Vec::new()
        };
        BlockSpace::new(slots, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_slot_names() {
        let err = BlockSpace::new(
            vec![Slot::new("a", 1), Slot::new("a", 2)],
            vec!["a".to_string()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_missing_h_slot() {
        let err = BlockSpace::new(vec![Slot::new("a", 1)], vec!["b".to_string()]);
        assert!(err.is_err());
    }

    #[test]
    fn offsets_and_h_indices() {
        let sp = BlockSpace::new(
            vec![Slot::new("t", 2), Slot::new("H", 3), Slot::new("u", 1)],
            vec!["H".to_string()],
        )
        .unwrap();
        assert_eq!(sp.total_dim(), 6);
        assert_eq!(sp.offset(1), 2);
        assert_eq!(sp.h_indices(), vec![2, 3, 4]);
        assert_eq!(sp.slot_of(5), 2);
    }

    #[test]
    fn concat_uniquifies_names() {
        let a = BlockSpace::h_only(2).unwrap();
        let b = BlockSpace::h_only(3).unwrap();
        let c = BlockSpace::concat(&[&a, &b]).unwrap();
        assert_eq!(c.total_dim(), 5);
        assert_eq!(c.slot_count(), 2);
        assert_eq!(c.h_dim(), 5);
        assert_ne!(c.slots()[0].name, c.slots()[1].name);
    }
}
