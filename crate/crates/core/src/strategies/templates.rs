//! Prompt templates with `{placeholder}` substitution.
//!
//! Built-in templates ship under `templates/`; a directory of `<name>.txt`
//! files can override any subset of them. `{{` and `}}` render literal braces.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    Generation,
    CompileFix,
    Direct,
    Explain,
    DebugFix,
    BanditFix,
    Verbalize,
    VerbalizedFix,
    SolutionGen,
    FdspFix,
}

impl TemplateName {
    pub const ALL: [TemplateName; 10] = [
        TemplateName::Generation,
        TemplateName::CompileFix,
        TemplateName::Direct,
        TemplateName::Explain,
        TemplateName::DebugFix,
        TemplateName::BanditFix,
        TemplateName::Verbalize,
        TemplateName::VerbalizedFix,
        TemplateName::SolutionGen,
        TemplateName::FdspFix,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateName::Generation => "generation",
            TemplateName::CompileFix => "compile_fix",
            TemplateName::Direct => "direct",
            TemplateName::Explain => "explain",
            TemplateName::DebugFix => "debug_fix",
            TemplateName::BanditFix => "bandit_fix",
            TemplateName::Verbalize => "verbalize",
            TemplateName::VerbalizedFix => "verbalized_fix",
            TemplateName::SolutionGen => "solution_gen",
            TemplateName::FdspFix => "fdsp_fix",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateName::Generation => include_str!("../../templates/generation.txt"),
            TemplateName::CompileFix => include_str!("../../templates/compile_fix.txt"),
            TemplateName::Direct => include_str!("../../templates/direct.txt"),
            TemplateName::Explain => include_str!("../../templates/explain.txt"),
            TemplateName::DebugFix => include_str!("../../templates/debug_fix.txt"),
            TemplateName::BanditFix => include_str!("../../templates/bandit_fix.txt"),
            TemplateName::Verbalize => include_str!("../../templates/verbalize.txt"),
            TemplateName::VerbalizedFix => include_str!("../../templates/verbalized_fix.txt"),
            TemplateName::SolutionGen => include_str!("../../templates/solution_gen.txt"),
            TemplateName::FdspFix => include_str!("../../templates/fdsp_fix.txt"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {template} uses placeholder {{{placeholder}}} but no value was supplied")]
    MissingPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("template {template} has an unterminated placeholder")]
    Unterminated { template: String },
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    texts: BTreeMap<TemplateName, String>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            texts: TemplateName::ALL
                .into_iter()
                .map(|n| (n, n.builtin().to_string()))
                .collect(),
        }
    }
}

impl PromptTemplates {
    /// Built-ins, overridden by any `<name>.txt` present in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::default();
        for name in TemplateName::ALL {
            let path = dir.join(format!("{}.txt", name.file_stem()));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                t.texts.insert(name, text);
            }
        }
        Ok(t)
    }

    pub fn text(&self, name: TemplateName) -> &str {
        &self.texts[&name]
    }

    pub fn set(&mut self, name: TemplateName, text: impl Into<String>) {
        self.texts.insert(name, text.into());
    }

    /// SHA-256 over every template's name and text, in a fixed order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, text) in &self.texts {
            h.update(name.file_stem().as_bytes());
            h.update([0]);
            h.update(text.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    pub fn render(
        &self,
        name: TemplateName,
        vars: &[(&str, &str)],
    ) -> Result<String, TemplateError> {
        render_text(name.file_stem(), self.text(name), vars)
    }
}

fn render_text(template: &str, text: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len() + 256);
    let mut rest = text;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push('{');
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push('}');
            rest = after;
        } else if let Some(after) = tail.strip_prefix('{') {
            let end = after.find('}').ok_or_else(|| TemplateError::Unterminated {
                template: template.to_string(),
            })?;
            let key = &after[..end];
            let is_ident =
                !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if is_ident {
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| TemplateError::MissingPlaceholder {
                        template: template.to_string(),
                        placeholder: key.to_string(),
                    })?;
                out.push_str(value);
                rest = &after[end + 1..];
            } else {
                out.push('{');
                rest = after;
            }
        } else {
            out.push('}');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}
