//! Name-keyed constructor tables for interchangeable strategies.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

type Ctor<T, P> = Box<dyn Fn(&P) -> Box<T> + Send + Sync>;

/// Maps strategy names to constructors taking a shared parameter block `P`.
pub struct Registry<T: ?Sized, P = ()> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Ctor<T, P>>,
}

impl<T: ?Sized, P> Registry<T, P> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `ctor` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &'static str, ctor: F) -> &mut Self
    where
        F: Fn(&P) -> Box<T> + Send + Sync + 'static,
    {
        self.entries.insert(name, Box::new(ctor));
        self
    }

    pub fn create(&self, name: &str, params: &P) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(ctor) => Ok(ctor(params)),
            None => Err(Error::Config(format!(
                "unknown {} {name:?} (available: {})",
                self.kind,
                self.names().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl<T: ?Sized, P> fmt::Debug for Registry<T, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }
    struct Hello(u32);
    impl Greeter for Hello {
        fn greet(&self) -> String {
            format!("hello {}", self.0)
        }
    }

    #[test]
    fn create_by_name() {
        let mut reg: Registry<dyn Greeter, u32> = Registry::new("greeter");
        reg.register("hello", |n| Box::new(Hello(*n)));
        assert_eq!(reg.create("hello", &3).unwrap().greet(), "hello 3");
        let err = reg.create("bye", &0).err().unwrap().to_string();
        assert!(err.contains("unknown greeter \"bye\""), "{err}");
        assert!(err.contains("hello"));
    }
}
