//! Tables keyed by tuples of set-element positions.

use std::collections::HashMap;

/// Above this many slots a table switches from a flat array to a hash map.
const DENSE_LIMIT: usize = 1 << 25;

pub(crate) trait Slot: Copy {
    const EMPTY: Self;
    fn is_empty(self) -> bool;
}

impl Slot for u32 {
    const EMPTY: u32 = u32::MAX;
    fn is_empty(self) -> bool {
        self == u32::MAX
    }
}

impl Slot for f64 {
    const EMPTY: f64 = f64::NAN;
    fn is_empty(self) -> bool {
        self.is_nan()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum KeyTable<T> {
    Dense { dims: Vec<usize>, data: Vec<T>, len: usize },
    Sparse { map: HashMap<Box<[u32]>, T> },
}

impl<T: Slot> KeyTable<T> {
    pub fn new(dims: &[usize]) -> Self {
        let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        match total {
            Some(n) if n <= DENSE_LIMIT => KeyTable::Dense { dims: dims.to_vec(), data: vec![T::EMPTY; n], len: 0 },
            _ => KeyTable::Sparse { map: HashMap::new() },
        }
    }

    fn offset(dims: &[usize], key: &[u32]) -> usize {
        debug_assert_eq!(dims.len(), key.len());
        let mut off = 0usize;
        for (d, k) in dims.iter().zip(key) {
            off = off * d + *k as usize;
        }
        off
    }

    pub fn get(&self, key: &[u32]) -> Option<T> {
        match self {
            KeyTable::Dense { dims, data, .. } => {
                let v = data[Self::offset(dims, key)];
                (!v.is_empty()).then_some(v)
            }
            KeyTable::Sparse { map } => map.get(key).copied(),
        }
    }

    pub fn contains(&self, key: &[u32]) -> bool {
        self.get(key).is_some()
    }

    /// Inserts and returns the previous value, if any.
    pub fn insert(&mut self, key: &[u32], v: T) -> Option<T> {
        match self {
            KeyTable::Dense { dims, data, len } => {
                let slot = &mut data[Self::offset(dims, key)];
                let prev = *slot;
                *slot = v;
                if prev.is_empty() {
                    *len += 1;
                    None
                } else {
                    Some(prev)
                }
            }
            KeyTable::Sparse { map } => map.insert(key.into(), v),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            KeyTable::Dense { len, .. } => *len,
            KeyTable::Sparse { map } => map.len(),
        }
    }
}
