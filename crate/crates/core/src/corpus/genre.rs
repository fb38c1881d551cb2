//! The ten reader-vote genre groups and their short aliases.

/// `(full group name, alias)`, in canonical order (alphabetical by full name).
const GROUPS: [(&str, &str); 10] = [
    ("children", "children"),
    ("comics, graphic", "comics"),
    ("fantasy, paranormal", "fantasy"),
    ("fiction", "fiction"),
    ("history, historical fiction, biography", "history"),
    ("mystery, thriller, crime", "mystery"),
    ("non-fiction", "fact"),
    ("poetry", "poetry"),
    ("romance", "romance"),
    ("young-adult", "youth"),
];

pub const GENRE_COUNT: usize = GROUPS.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenreCatalog {
    groups: &'static [(&'static str, &'static str); GENRE_COUNT],
}

impl Default for GenreCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl GenreCatalog {
    pub const fn standard() -> Self {
        Self { groups: &GROUPS }
    }

    pub fn len(&self) -> usize {
        GENRE_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.groups.iter().map(|(name, _)| *name)
    }

    pub fn aliases(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.groups.iter().map(|(_, alias)| *alias)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|(n, _)| *n == name)
    }

    pub fn name(&self, index: usize) -> &'static str {
        self.groups[index].0
    }

    pub fn alias(&self, index: usize) -> &'static str {
        self.groups[index].1
    }
}
