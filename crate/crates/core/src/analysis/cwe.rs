//! CWE registry and the Bandit rule → CWE table.

use serde::{Deserialize, Serialize};

use crate::types::CweId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CweEntry {
    pub cwe_id: CweId,
    pub description: &'static str,
}

impl<'de> Deserialize<'de> for CweEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let id = CweId::deserialize(d)?;
        lookup(id).ok_or_else(|| serde::de::Error::custom(format!("{id} is not in the registry")))
    }
}

const fn entry(id: u32, description: &'static str) -> CweEntry {
    CweEntry {
        cwe_id: CweId(id),
        description,
    }
}

static REGISTRY: [CweEntry; 31] = [
    entry(20, "Improper Input Validation"),
    entry(22, "Improper Limitation of a Pathname to a Restricted Directory ('Path Traversal')"),
    entry(78, "Improper Neutralization of Special Elements used in an OS Command ('OS Command Injection')"),
    entry(79, "Improper Neutralization of Input During Web Page Generation ('Cross-site Scripting')"),
    entry(89, "Improper Neutralization of Special Elements used in an SQL Command ('SQL Injection')"),
    entry(94, "Improper Control of Generation of Code ('Code Injection')"),
    entry(119, "Improper Restriction of Operations within the Bounds of a Memory Buffer"),
    entry(200, "Exposure of Sensitive Information to an Unauthorized Actor"),
    entry(284, "Improper Access Control"),
    entry(287, "Improper Authentication"),
    entry(306, "Missing Authentication for Critical Function"),
    entry(352, "Cross-Site Request Forgery (CSRF)"),
    entry(400, "Uncontrolled Resource Consumption"),
    entry(502, "Deserialization of Untrusted Data"),
    entry(611, "Improper Restriction of XML External Entity Reference (XXE)"),
    entry(703, "Improper Handling of Exceptional Conditions"),
    entry(798, "Use of Hard-coded Credentials"),
    entry(120, "Buffer Copy without Checking Size of Input ('Classic Buffer Overflow')"),
    entry(125, "Out-of-bounds Read"),
    entry(190, "Integer Overflow or Wraparound"),
    entry(295, "Improper Certificate Validation"),
    entry(416, "Use After Free"),
    entry(434, "Unrestricted Upload of File with Dangerous Type"),
    entry(476, "NULL Pointer Dereference"),
    entry(732, "Incorrect Permission Assignment for Critical Resource"),
    entry(787, "Out-of-bounds Write"),
    entry(862, "Missing Authorization"),
    entry(918, "Server-Side Request Forgery (SSRF)"),
    entry(1021, "Improper Restriction of Rendered UI Layers or Frames"),
    entry(1295, "Debug Features Enabled in Production"),
    // child of CWE-798; Bandit tags its hard-coded password checks with it
    entry(259, "Use of Hard-coded Password"),
];

/// All known CWE entries.
pub fn registry() -> &'static [CweEntry] {
    &REGISTRY
}

pub fn lookup(id: CweId) -> Option<CweEntry> {
    REGISTRY.iter().copied().find(|e| e.cwe_id == id)
}

/// Static rule table. Accepts both Bandit ids (`B608`) and RuleScan ids
/// (`RS-B608`).
pub fn map_rule_to_cwe(rule_id: &str) -> Option<CweEntry> {
    let bare = rule_id.strip_prefix("RS-").unwrap_or(rule_id);
    let cwe = match bare {
        "B608" => 89,
        "B602" | "B605" => 78,
        "B307" => 94,
        "B105" | "B106" | "B107" => 259,
        "B201" => 1295,
        "B113" => 400,
        "B301" => 502,
        _ => return None,
    };
    lookup(CweId(cwe))
}
