use std::collections::HashMap;

use umax_core::uma::ResourceDescription;
use umax_core::Scope;

/// A resource set registered by a resource server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRegistration {
    pub id: String,
    /// Authenticated origin of the registering server.
    pub rs_origin: String,
    pub resource_id: String,
    pub name: Option<String>,
    pub resource_type: Option<String>,
    pub scopes: Vec<Scope>,
}

impl ResourceRegistration {
    pub fn description(&self) -> ResourceDescription {
        ResourceDescription {
            resource_id: self.resource_id.clone(),
            name: self.name.clone(),
            resource_type: self.resource_type.clone(),
            resource_scopes: self.scopes.clone(),
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct Registry {
    by_id: HashMap<String, ResourceRegistration>,
    by_resource: HashMap<(String, String), String>,
}

impl Registry {
    /// Inserts unless `(rs_origin, resource_id)` is taken, returning the
    /// existing id on conflict.
    pub(crate) fn insert(&mut self, reg: ResourceRegistration) -> Result<(), String> {
        let key = (reg.rs_origin.clone(), reg.resource_id.clone());
        if let Some(existing) = self.by_resource.get(&key) {
            return Err(existing.clone());
        }
        self.by_resource.insert(key, reg.id.clone());
        self.by_id.insert(reg.id.clone(), reg);
        Ok(())
    }

    pub(crate) fn get(&self, id: &str) -> Option<&ResourceRegistration> {
        self.by_id.get(id)
    }

    pub(crate) fn get_mut(&mut self, id: &str) -> Option<&mut ResourceRegistration> {
        self.by_id.get_mut(id)
    }

    pub(crate) fn find(&self, rs_origin: &str, resource_id: &str) -> Option<&ResourceRegistration> {
        self.by_resource.get(&(rs_origin.to_owned(), resource_id.to_owned())).and_then(|id| self.by_id.get(id))
    }

    pub(crate) fn remove(&mut self, id: &str) -> Option<ResourceRegistration> {
        let reg = self.by_id.remove(id)?;
        self.by_resource.remove(&(reg.rs_origin.clone(), reg.resource_id.clone()));
        Some(reg)
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = &ResourceRegistration> {
        self.by_id.values()
    }
}
