use std::collections::HashMap;
use std::fmt;

/// Name of the universal type used when a program declares no types.
pub const DEFAULT_TYPE: &str = "thing";

/// Index of a declared type in a [`SymbolTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub(crate) usize);

impl TypeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Clone, Debug, Default)]
struct Domain {
    name: String,
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

/// Per-type bidirectional maps between constant names and dense integer ids.
///
/// Each type owns an independent index space `0..size(t)`, so the same
/// name interned under two types receives two unrelated ids.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    domains: Vec<Domain>,
    by_name: HashMap<String, TypeId>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    /// A table holding only the default type.
    pub fn new() -> Self {
        let mut table = SymbolTable {
            domains: Vec::new(),
            by_name: HashMap::new(),
        };
        table.declare_type(DEFAULT_TYPE);
        table
    }

    pub fn declare_type(&mut self, name: &str) -> TypeId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = TypeId(self.domains.len());
        self.domains.push(Domain {
            name: name.to_string(),
            ..Domain::default()
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn default_type(&self) -> TypeId {
        TypeId(0)
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.by_name.get(name).copied()
    }

    pub fn type_name(&self, ty: TypeId) -> &str {
        &self.domains[ty.0].name
    }

    pub fn types(&self) -> impl Iterator<Item = TypeId> + '_ {
        (0..self.domains.len()).map(TypeId)
    }

    /// Returns the id of `name` in `ty`, allocating the next dense id on
    /// first sight.
    pub fn intern(&mut self, name: &str, ty: TypeId) -> usize {
        let domain = &mut self.domains[ty.0];
        if let Some(&id) = domain.ids.get(name) {
            return id;
        }
        let id = domain.names.len();
        domain.names.push(name.to_string());
        domain.ids.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str, ty: TypeId) -> Option<usize> {
        self.domains[ty.0].ids.get(name).copied()
    }

    pub fn name(&self, ty: TypeId, id: usize) -> Option<&str> {
        self.domains[ty.0].names.get(id).map(String::as_str)
    }

    /// Domain size `|C_t|`.
    pub fn size(&self, ty: TypeId) -> usize {
        self.domains[ty.0].names.len()
    }

    pub fn names(&self, ty: TypeId) -> &[String] {
        &self.domains[ty.0].names
    }
}
