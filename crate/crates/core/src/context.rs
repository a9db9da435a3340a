//! Program labels and the call-string contexts built from them.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;

/// Dense identifier for a λ-term, call site or statement.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A bounded context: at most `k` labels, most recent first.
///
/// Serves as the abstract time of k-CFA and as the abstract environment of
/// m-CFA.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Contour(Vec<Label>);

impl Contour {
    pub fn empty() -> Self {
        Contour(Vec::new())
    }

    pub fn from_labels(labels: impl IntoIterator<Item = Label>) -> Self {
        Contour(labels.into_iter().collect())
    }

    /// `first_k(label : self)`.
    pub fn push_truncate(&self, label: Label, k: usize) -> Contour {
        let mut out = Vec::with_capacity(k.min(self.0.len() + 1));
        if k > 0 {
            out.push(label);
            out.extend(self.0.iter().copied().take(k - 1));
        }
        Contour(out)
    }

    pub fn truncate(&self, k: usize) -> Contour {
        Contour(self.0.iter().copied().take(k).collect())
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Contour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("⟩")
    }
}

#[derive(Debug)]
struct Node {
    head: Label,
    tail: Option<Arc<Node>>,
}

// Unlinks uniquely owned tails iteratively so long strings drop without
// deep recursion.
impl Drop for Node {
    fn drop(&mut self) {
        let mut next = self.tail.take();
        while let Some(n) = next {
            next = match Arc::try_unwrap(n) {
                Ok(mut inner) => inner.tail.take(),
                Err(_) => None,
            };
        }
    }
}

/// An unbounded, persistent call string (most recent label first).
///
/// Concrete machines use these as times; `first_k` is the k-CFA abstraction.
/// Cloning and pushing are O(1).
#[derive(Clone, Debug, Default)]
pub struct CallString {
    node: Option<Arc<Node>>,
    len: usize,
}

impl CallString {
    pub fn empty() -> Self {
        CallString::default()
    }

    pub fn push(&self, label: Label) -> CallString {
        CallString { node: Some(Arc::new(Node { head: label, tail: self.node.clone() })), len: self.len + 1 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn head(&self) -> Option<Label> {
        self.node.as_ref().map(|n| n.head)
    }

    pub fn tail(&self) -> CallString {
        match &self.node {
            None => CallString::empty(),
            Some(n) => CallString { node: n.tail.clone(), len: self.len - 1 },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        let mut cur = self.node.as_deref();
        std::iter::from_fn(move || {
            let n = cur?;
            cur = n.tail.as_deref();
            Some(n.head)
        })
    }

    pub fn first_k(&self, k: usize) -> Contour {
        Contour(self.iter().take(k).collect())
    }

    /// True when `self` is a proper suffix of `other`, the order in which
    /// ticking produces call strings.
    pub fn is_proper_suffix_of(&self, other: &CallString) -> bool {
        if other.len <= self.len {
            return false;
        }
        let mut cur = other.clone();
        while cur.len > self.len {
            cur = cur.tail();
        }
        cur == *self
    }
}

impl PartialEq for CallString {
    fn eq(&self, other: &Self) -> bool {
        if self.len != other.len {
            return false;
        }
        let (mut a, mut b) = (self.node.as_ref(), other.node.as_ref());
        loop {
            match (a, b) {
                (None, None) => return true,
                (Some(x), Some(y)) => {
                    if Arc::ptr_eq(x, y) {
                        return true;
                    }
                    if x.head != y.head {
                        return false;
                    }
                    a = x.tail.as_ref();
                    b = y.tail.as_ref();
                }
                _ => return false,
            }
        }
    }
}

impl Eq for CallString {}

impl Hash for CallString {
    // Length and the two most recent labels; equal strings hash equally.
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.len.hash(state);
        for l in self.iter().take(2) {
            l.hash(state);
        }
    }
}

impl fmt::Display for CallString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨")?;
        for (i, l) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("⟩")
    }
}
