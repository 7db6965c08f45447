//! Name-keyed registries for interchangeable algorithm variants.
//!
//! Every pluggable family (density surrogates, smoothing filters,
//! eigensolvers, edge-basis updates) exposes a `Registry` populated with its
//! built-in variants. Configuration files and the command line refer to
//! variants by name; the registry turns that name into a boxed trait object.

use crate::error::{Error, Result};

type Constructor<T, P> = Box<dyn Fn(&P) -> Box<T> + Send + Sync>;

pub struct Registry<T: ?Sized, P = ()> {
    family: &'static str,
    entries: Vec<(&'static str, Constructor<T, P>)>,
}

impl<T: ?Sized, P> Registry<T, P> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: Vec::new(),
        }
    }

    /// Registers a constructor. A later registration under an existing name
    /// replaces the earlier one.
    pub fn register<F>(&mut self, name: &'static str, ctor: F) -> &mut Self
    where
        F: Fn(&P) -> Box<T> + Send + Sync + 'static,
    {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, Box::new(ctor)));
        self
    }

    pub fn with<F>(mut self, name: &'static str, ctor: F) -> Self
    where
        F: Fn(&P) -> Box<T> + Send + Sync + 'static,
    {
        self.register(name, ctor);
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| *n == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn family(&self) -> &'static str {
        self.family
    }

    pub fn create(&self, name: &str, params: &P) -> Result<Box<T>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, ctor)| ctor(params))
            .ok_or_else(|| Error::UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

impl<T: ?Sized> Registry<T, ()> {
    pub fn get(&self, name: &str) -> Result<Box<T>> {
        self.create(name, &())
    }
}
