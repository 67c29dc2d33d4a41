//! Cells of the study area and subregion selections over them.
//!
//! A [`Partition`] is an ordered list of named, disjoint cells plus one
//! reserved pseudo-cell for respondents who gave no location. The reserved
//! cell always sits at index `len()`, after the user cells, and it can never
//! be part of a [`Subregion`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Self {
        CellId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        CellId(s.to_string())
    }
}

/// Label used for the reserved no-location cell in reports and files.
pub const UNKNOWN_LABEL: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<CellId>,
    index: HashMap<CellId, usize>,
}

impl Partition {
    pub fn new<I, C>(cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: Into<CellId>,
    {
        let cells: Vec<CellId> = cells.into_iter().map(Into::into).collect();
        if cells.is_empty() {
            return validation("partition needs at least one cell");
        }
        let mut index = HashMap::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            if c.as_str().is_empty() || c.as_str() == UNKNOWN_LABEL {
                return validation(format!("cell id {c:?} is reserved"));
            }
            if index.insert(c.clone(), i).is_some() {
                return validation(format!("duplicate cell id {c}"));
            }
        }
        Ok(Partition { cells, index })
    }

    /// Number of user cells (the reserved unknown cell is not counted).
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Slot count for per-cell tables: user cells plus the unknown cell.
    pub fn slots(&self) -> usize {
        self.cells.len() + 1
    }

    pub fn unknown_index(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn index_of(&self, id: &CellId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Resolve an optional location; `None` maps to the unknown cell.
    pub fn slot_of(&self, cell: Option<&CellId>) -> Option<usize> {
        match cell {
            None => Some(self.unknown_index()),
            Some(c) => self.index_of(c),
        }
    }

    pub fn label(&self, slot: usize) -> &str {
        self.cells.get(slot).map_or(UNKNOWN_LABEL, CellId::as_str)
    }

    pub fn subregion<'a, I>(&self, ids: I) -> Result<Subregion>
    where
        I: IntoIterator<Item = &'a CellId>,
    {
        let mut cells = BTreeSet::new();
        for id in ids {
            match self.index_of(id) {
                Some(i) => {
                    cells.insert(i);
                }
                None => return validation(format!("cell {id} is not in the partition")),
            }
        }
        Ok(Subregion { cells })
    }

    /// Every user cell, i.e. the study area without the unknown cell.
    pub fn all_known(&self) -> Subregion {
        Subregion {
            cells: (0..self.cells.len()).collect(),
        }
    }

    pub fn subregion_from_indices(&self, idx: impl IntoIterator<Item = usize>) -> Result<Subregion> {
        let mut cells = BTreeSet::new();
        for i in idx {
            if i >= self.cells.len() {
                return validation(format!("cell index {i} outside partition of {} cells", self.cells.len()));
            }
            cells.insert(i);
        }
        Ok(Subregion { cells })
    }
}

/// A set of user-cell indices. Only constructible through a [`Partition`],
/// so it never contains the unknown slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subregion {
    cells: BTreeSet<usize>,
}

impl Subregion {
    pub fn empty() -> Self {
        Subregion::default()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.cells.contains(&slot)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn union(&self, other: &Subregion) -> Subregion {
        Subregion {
            cells: self.cells.union(&other.cells).copied().collect(),
        }
    }

    pub fn is_disjoint(&self, other: &Subregion) -> bool {
        self.cells.is_disjoint(&other.cells)
    }

    /// Sum a per-slot table over the member cells.
    pub fn sum<T>(&self, per_slot: &[T]) -> T
    where
        T: Copy + std::iter::Sum<T>,
    {
        self.cells.iter().map(|&i| per_slot[i]).sum()
    }
}
