use indexmap::IndexSet;

/// Bijection between raw string ids and dense integer ids, in first-seen
/// order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: IndexSet<String>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(i) = self.names.get_index_of(raw) {
            return i as u32;
        }
        self.names.insert(raw.to_owned());
        (self.names.len() - 1) as u32
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.names.get_index_of(raw).map(|i| i as u32)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get_index(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, s)| (i as u32, s.as_str()))
    }
}

impl<S: Into<String>> FromIterator<S> for IdMap {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        IdMap {
            names: iter.into_iter().map(Into::into).collect(),
        }
    }
}
