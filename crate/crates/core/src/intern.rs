//! Hash-consing for environments and stores.

use std::hash::Hash;

use indexmap::IndexSet;

/// Dense id handed out by an [`Interner`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Id(pub u32);

impl Id {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug)]
pub struct Interner<T: Eq + Hash> {
    items: IndexSet<T>,
}

impl<T: Eq + Hash> Default for Interner<T> {
    fn default() -> Self {
        Interner { items: IndexSet::new() }
    }
}

impl<T: Eq + Hash> Interner<T> {
    pub fn intern(&mut self, item: T) -> Id {
        let (i, _) = self.items.insert_full(item);
        Id(i as u32)
    }

    pub fn get(&self, item: &T) -> Option<Id> {
        self.items.get_index_of(item).map(|i| Id(i as u32))
    }

    pub fn resolve(&self, id: Id) -> &T {
        &self.items[id.index()]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
