//! Application-domain classification from library usage.
//!
//! A program belongs to every domain whose libraries it imports or refers to
//! through a dotted name (`os.path.join` counts as `os`). Matching is on the
//! top-level module name and is case-sensitive.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::types::{Domain, TaskPrompt};

const REGISTRY: &[(Domain, &[&str])] = &[
    (
        Domain::Computation,
        &[
            "os",
            "pandas",
            "numpy",
            "sklearn",
            "scipy",
            "math",
            "nltk",
            "statistics",
            "cv2",
            "statsmodels",
            "tensorflow",
            "sympy",
            "textblob",
            "skimage",
        ],
    ),
    (
        Domain::System,
        &[
            "os",
            "json",
            "csv",
            "shutil",
            "glob",
            "subprocess",
            "pathlib",
            "io",
            "zipfile",
            "sys",
            "logging",
            "pickle",
            "struct",
            "psutil",
        ],
    ),
    (
        Domain::Network,
        &[
            "requests",
            "urllib",
            "bs4",
            "socket",
            "django",
            "flask",
            "ipaddress",
            "smtplib",
            "http",
            "flask_mail",
            "cgi",
            "ssl",
            "email",
            "mechanize",
            "url",
        ],
    ),
    (
        Domain::Cryptography,
        &[
            "hashlib",
            "base64",
            "binascii",
            "codecs",
            "rsa",
            "cryptography",
            "hmac",
            "blake3",
            "secrets",
            "Crypto",
        ],
    ),
    (
        Domain::General,
        &[
            "random",
            "re",
            "collections",
            "itertools",
            "string",
            "operator",
            "heapq",
            "ast",
            "functools",
            "regex",
            "bisect",
            "inspect",
            "unicodedata",
        ],
    ),
    (
        Domain::Database,
        &[
            "sqlite3",
            "mysql",
            "psycopg2",
            "sqlalchemy",
            "pymongo",
            "sql",
        ],
    ),
    (
        Domain::WebFrameworks,
        &["django", "flask", "fastapi", "tornado", "pyramid", "bottle"],
    ),
];

// Common variable names that double as registry entries; they count only
// when imported.
const IMPORT_ONLY: &[&str] = &["url", "sql", "string", "regex"];

static IMPORT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*import\s+(.+)$").unwrap());
static FROM_IMPORT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*from\s+([A-Za-z_][\w.]*)\s+import\b").unwrap());
static DOTTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^\w.])([A-Za-z_]\w*)\.[A-Za-z_]").unwrap());

fn domains_of(module: &str) -> impl Iterator<Item = Domain> + '_ {
    REGISTRY
        .iter()
        .filter(move |(_, libs)| libs.contains(&module))
        .map(|(d, _)| *d)
}

fn top_level(module: &str) -> &str {
    module.split('.').next().unwrap_or(module).trim()
}

/// Library names imported or referenced in `code_or_prompt`.
pub fn referenced_libraries(code_or_prompt: &str) -> BTreeSet<String> {
    let mut libs = BTreeSet::new();
    for line in code_or_prompt.lines().flat_map(|l| l.split(';')) {
        if line.trim_start().starts_with('#') {
            continue;
        }
        if let Some(c) = IMPORT.captures(line) {
            for part in c[1].split(',') {
                let name = part.split_whitespace().next().unwrap_or("");
                let name = top_level(name.trim_matches(|c| c == '(' || c == ')'));
                if !name.is_empty() {
                    libs.insert(name.to_string());
                }
            }
            continue;
        }
        if let Some(c) = FROM_IMPORT.captures(line) {
            libs.insert(top_level(&c[1]).to_string());
            continue;
        }
        for c in DOTTED.captures_iter(line) {
            let name = &c[1];
            if !IMPORT_ONLY.contains(&name) && domains_of(name).next().is_some() {
                libs.insert(name.to_string());
            }
        }
    }
    libs
}

/// Union of the domains of every library `code_or_prompt` uses.
pub fn classify_domains(code_or_prompt: &str) -> BTreeSet<Domain> {
    referenced_libraries(code_or_prompt)
        .iter()
        .flat_map(|lib| domains_of(lib))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainCount {
    pub domain: Domain,
    pub count: usize,
    /// Share of the dataset, in tenths of a percent.
    pub percent_tenths: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub domains: Vec<DomainCount>,
}

impl DatasetStats {
    pub fn render_markdown(&self) -> String {
        let mut out = String::from("| Domain | Count |\n|---|---|\n");
        for d in &self.domains {
            out.push_str(&format!(
                "| {} | {} ({}%) |\n",
                d.domain.label(),
                d.count,
                crate::metrics::Percent::from_tenths(d.percent_tenths)
            ));
        }
        out.push_str(&format!("| Total | {} |\n", self.total));
        out
    }
}

/// Per-domain counts over `tasks`. A task's domains are its declared ones if
/// present, else those of its code in `codes` (keyed by task id), else those
/// of its prompt text.
pub fn dataset_stats(tasks: &[TaskPrompt], codes: &BTreeMap<String, String>) -> DatasetStats {
    let mut counts: BTreeMap<Domain, usize> = Domain::ALL.iter().map(|d| (*d, 0)).collect();
    for task in tasks {
        let domains = if !task.domains.is_empty() {
            task.domains.clone()
        } else if let Some(code) = codes.get(&task.id) {
            classify_domains(code)
        } else {
            classify_domains(&task.text)
        };
        for d in domains {
            *counts.get_mut(&d).expect("all domains seeded") += 1;
        }
    }
    let total = tasks.len();
    DatasetStats {
        total,
        domains: Domain::ALL
            .iter()
            .map(|d| {
                let count = counts[d];
                let percent_tenths = if total == 0 {
                    0
                } else {
                    crate::metrics::percent_vulnerable(count as u64, total as u64)
                        .map(|p| p.tenths())
                        .unwrap_or(0)
                };
                DomainCount {
                    domain: *d,
                    count,
                    percent_tenths,
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SourceDataset;

    fn set(ds: &[Domain]) -> BTreeSet<Domain> {
        ds.iter().copied().collect()
    }

    #[test]
    fn sqlite_is_database() {
        assert_eq!(classify_domains("import sqlite3"), set(&[Domain::Database]));
    }

    #[test]
    fn os_is_computation_and_system() {
        assert_eq!(
            classify_domains("import os"),
            set(&[Domain::Computation, Domain::System])
        );
    }

    #[test]
    fn no_imports_no_domains() {
        assert!(classify_domains("x = 1").is_empty());
    }

    #[test]
    fn import_forms() {
        let code = "import hashlib, json as j\nfrom urllib.parse import quote\nimport xml.etree.ElementTree as ET\nfrom . import sibling";
        assert_eq!(
            referenced_libraries(code),
            ["hashlib", "json", "urllib", "xml"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        );
        assert_eq!(
            classify_domains(code),
            set(&[Domain::Cryptography, Domain::System, Domain::Network])
        );
    }

    #[test]
    fn dotted_references_count_without_an_import() {
        assert_eq!(
            classify_domains("p = os.path.join(a, b)"),
            set(&[Domain::Computation, Domain::System])
        );
        // attribute access on an object is not a module reference
        assert!(classify_domains("self.os.path").is_empty());
        assert!(classify_domains("url.split('/')").is_empty());
    }

    #[test]
    fn flask_is_network_and_web_framework() {
        assert_eq!(
            classify_domains("from flask import Flask"),
            set(&[Domain::Network, Domain::WebFrameworks])
        );
        assert!(
            classify_domains("import Flask").is_empty(),
            "case-sensitive"
        );
        assert_eq!(
            classify_domains("from Crypto.Cipher import AES"),
            set(&[Domain::Cryptography])
        );
    }

    #[test]
    fn comments_are_ignored() {
        assert!(classify_domains("# import sqlite3").is_empty());
    }

    fn task(id: &str) -> TaskPrompt {
        TaskPrompt {
            id: id.into(),
            text: String::new(),
            source_dataset: SourceDataset::Custom,
            domains: BTreeSet::new(),
        }
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let stats = dataset_stats(&[], &BTreeMap::new());
        assert_eq!(stats.total, 0);
        assert!(stats
            .domains
            .iter()
            .all(|d| d.count == 0 && d.percent_tenths == 0));
    }

    #[test]
    fn ten_item_corpus_matches_hand_labels() {
        // hand-labelled: Computation 3, System 4, Network 2, Cryptography 2,
        // General 2, Database 3, Web Frameworks 1
        let codes = [
            "import sqlite3",
            "import os",
            "import os\nimport sqlite3",
            "import subprocess",
            "import hashlib\nimport random",
            "from flask import request",
            "import json",
            "import requests",
            "import numpy as np\nimport re",
            "import pymongo\nimport base64",
        ];
        let tasks: Vec<TaskPrompt> = (0..10).map(|i| task(&format!("t{i}"))).collect();
        let map: BTreeMap<String, String> = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("t{i}"), c.to_string()))
            .collect();
        let stats = dataset_stats(&tasks, &map);
        let got: Vec<(Domain, usize, i64)> = stats
            .domains
            .iter()
            .map(|d| (d.domain, d.count, d.percent_tenths))
            .collect();
        assert_eq!(
            got,
            vec![
                (Domain::Computation, 3, 300),
                (Domain::System, 4, 400),
                (Domain::Network, 2, 200),
                (Domain::Cryptography, 2, 200),
                (Domain::General, 2, 200),
                (Domain::Database, 3, 300),
                (Domain::WebFrameworks, 1, 100),
            ]
        );
    }

    #[test]
    fn declared_domains_win() {
        let mut t = task("a");
        t.domains = set(&[Domain::General]);
        let map = BTreeMap::from([("a".to_string(), "import sqlite3".to_string())]);
        let stats = dataset_stats(&[t], &map);
        assert_eq!(stats.domains[4].count, 1);
        assert_eq!(stats.domains[5].count, 0);
    }
}
