//! Role definitions and the access matrix that bounds what each agent sees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::case::{DocType, SourceDocument};
use crate::evidence::QueryTemplate;

mod package;

pub use package::{build_role_package, build_role_packages, CaseProjection, Demographics, PackageError, RolePackage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Chair,
    Oncologist,
    Radiologist,
    Pathologist,
    NuclearMedicine,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Chair,
        Role::Oncologist,
        Role::Radiologist,
        Role::Pathologist,
        Role::NuclearMedicine,
    ];

    pub const SPECIALISTS: [Role; 4] = [Role::Oncologist, Role::Radiologist, Role::Pathologist, Role::NuclearMedicine];

    pub fn id(self) -> &'static str {
        match self {
            Role::Chair => "chair",
            Role::Oncologist => "oncologist",
            Role::Radiologist => "radiologist",
            Role::Pathologist => "pathologist",
            Role::NuclearMedicine => "nuclear_medicine",
        }
    }

    pub fn parse(id: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.id() == id)
    }

    pub fn is_specialist(self) -> bool {
        self != Role::Chair
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Structured-case field groups that can be granted to a role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseField {
    Demographics,
    Histology,
    FigoStage,
    PrimaryStrategy,
    Biomarkers,
    TreatmentHistory,
    PlatinumFreeInterval,
    EventFlags,
    Scene,
    Conflicts,
    SourceDocuments,
}

/// Grants documents of `doc_type`, optionally only those carrying `requires_tag`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocRule {
    pub doc_type: DocType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_tag: Option<String>,
}

impl DocRule {
    pub fn admits(&self, doc: &SourceDocument) -> bool {
        doc.doc_type == self.doc_type && self.requires_tag.as_deref().is_none_or(|t| doc.has_tag(t))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleAccess {
    pub doc_access: Vec<DocRule>,
    pub fields: BTreeSet<CaseField>,
    pub query_template: String,
}

impl RoleAccess {
    pub fn admits(&self, doc: &SourceDocument) -> bool {
        self.doc_access.iter().any(|r| r.admits(doc))
    }

    pub fn allowed_doc_types(&self) -> BTreeSet<DocType> {
        self.doc_access.iter().map(|r| r.doc_type).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("access matrix: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("access matrix {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("access matrix has no entry for role {0}")]
    MissingRole(Role),
    #[error("role {0} has an empty field set")]
    EmptyFields(Role),
    #[error("role {role} uses unknown query template {template}")]
    UnknownTemplate { role: Role, template: String },
}

/// Total map from the five roles to their access rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessMatrix {
    roles: BTreeMap<Role, RoleAccess>,
    /// Extra or overriding query templates, keyed by id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    templates: BTreeMap<String, Vec<String>>,
}

pub const DEFAULT_MATRIX_JSON: &str = include_str!("default_matrix.json");

impl AccessMatrix {
    pub fn from_json(text: &str) -> Result<Self, MatrixError> {
        let matrix: AccessMatrix = serde_json::from_str(text)?;
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn load(path: &Path) -> Result<Self, MatrixError> {
        let text = std::fs::read_to_string(path).map_err(|source| MatrixError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn new(roles: BTreeMap<Role, RoleAccess>) -> Result<Self, MatrixError> {
        let matrix = AccessMatrix {
            roles,
            templates: BTreeMap::new(),
        };
        matrix.validate()?;
        Ok(matrix)
    }

    fn validate(&self) -> Result<(), MatrixError> {
        for role in Role::ALL {
            let access = self.roles.get(&role).ok_or(MatrixError::MissingRole(role))?;
            if access.fields.is_empty() {
                return Err(MatrixError::EmptyFields(role));
            }
            if self.template(&access.query_template).is_none() {
                return Err(MatrixError::UnknownTemplate {
                    role,
                    template: access.query_template.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn access(&self, role: Role) -> &RoleAccess {
        &self.roles[&role]
    }

    pub fn template(&self, id: &str) -> Option<QueryTemplate> {
        match self.templates.get(id) {
            Some(terms) => Some(QueryTemplate {
                id: id.to_string(),
                terms: terms.clone(),
            }),
            None => QueryTemplate::builtin(id),
        }
    }

    pub fn query_template(&self, role: Role) -> QueryTemplate {
        self.template(&self.access(role).query_template)
            .expect("validated matrix resolves every template")
    }

    /// Copy with `doc_type` removed from `role`'s document rules.
    pub fn without_doc_type(&self, role: Role, doc_type: DocType) -> Self {
        let mut m = self.clone();
        if let Some(a) = m.roles.get_mut(&role) {
            a.doc_access.retain(|r| r.doc_type != doc_type);
        }
        m
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}

impl Default for AccessMatrix {
    fn default() -> Self {
        Self::from_json(DEFAULT_MATRIX_JSON).expect("shipped access matrix is valid")
    }
}
